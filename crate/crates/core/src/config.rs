//! Run configuration read from JSON. Every section has defaults, so `{}` is
//! a valid config (graphmind strategy at desk scale).
//!
//! ```json
//! {
//!   "seed": 42,
//!   "profiles": { "dim": 32, "spread": 0.3, "path": null },
//!   "strategy": { "graphmind": { "build": { "n_bots": 500, "tau": 0.97 } } },
//!   "fim": { "thresholds": null, "threshold_samples": 10000 },
//!   "humans": { "n_humans": 1000, "bridge_edges_per_side": 0 },
//!   "log_chains": true
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{KroneckerInitiator, WeightSequence, MAX_KRONECKER_POWER};
use crate::builder::{BuildConfig, FimSettings};
use crate::error::{Error, Result};
use crate::gsi::PathSearch;
use crate::profiles::DEFAULT_DIM;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSettings {
    pub dim: usize,
    /// Gaussian noise scale around each community centroid.
    pub spread: f64,
    /// Load bot profiles from this JSON-lines file instead of synthesizing.
    pub path: Option<PathBuf>,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings {
            dim: DEFAULT_DIM,
            spread: 0.3,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphmindParams {
    pub build: BuildConfig,
    pub search: PathSearch,
    /// Sampled proposals per pair, best one kept; below 2 the deterministic
    /// beam search is used.
    pub group_size: usize,
    /// Softmax temperature for sampled proposals.
    pub temperature: f64,
}

impl Default for GraphmindParams {
    fn default() -> Self {
        GraphmindParams {
            build: BuildConfig::default(),
            search: PathSearch::default(),
            group_size: 0,
            temperature: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomMhopParams {
    pub build: BuildConfig,
    /// Chain length in nodes.
    pub m: usize,
}

impl Default for RandomMhopParams {
    fn default() -> Self {
        RandomMhopParams {
            build: BuildConfig::default(),
            m: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChungLuParams {
    pub n: usize,
    /// Explicit weights; when absent they are drawn from a discrete power law.
    pub weights: Option<Vec<f64>>,
    pub exponent: f64,
    pub w_min: f64,
}

impl Default for ChungLuParams {
    fn default() -> Self {
        ChungLuParams {
            n: 500,
            weights: None,
            exponent: 2.5,
            w_min: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KroneckerParams {
    pub initiator: KroneckerInitiator,
    pub k: u32,
}

impl Default for KroneckerParams {
    fn default() -> Self {
        KroneckerParams {
            initiator: KroneckerInitiator::default(),
            k: 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Strategy {
    Graphmind(GraphmindParams),
    RandomMhop(RandomMhopParams),
    ChungLu(ChungLuParams),
    Kronecker(KroneckerParams),
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Graphmind(GraphmindParams::default())
    }
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Graphmind(_) => "graphmind",
            Strategy::RandomMhop(_) => "random-mhop",
            Strategy::ChungLu(_) => "chung-lu",
            Strategy::Kronecker(_) => "kronecker",
        }
    }

    /// Build settings of the completion-based strategies.
    pub fn build(&self) -> Option<&BuildConfig> {
        match self {
            Strategy::Graphmind(p) => Some(&p.build),
            Strategy::RandomMhop(p) => Some(&p.build),
            _ => None,
        }
    }

    pub fn build_mut(&mut self) -> Option<&mut BuildConfig> {
        match self {
            Strategy::Graphmind(p) => Some(&mut p.build),
            Strategy::RandomMhop(p) => Some(&mut p.build),
            _ => None,
        }
    }
}

/// Synthetic human population built with the bot strategy's stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanSettings {
    pub n_humans: usize,
    /// Defaults to the bot community count.
    pub n_communities: Option<usize>,
    pub bridge_edges_per_side: usize,
}

impl Default for HumanSettings {
    fn default() -> Self {
        HumanSettings {
            n_humans: 1000,
            n_communities: None,
            bridge_edges_per_side: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub profiles: ProfileSettings,
    pub strategy: Strategy,
    pub fim: FimSettings,
    pub humans: Option<HumanSettings>,
    /// Keep every completion chain for `export-chains`.
    pub log_chains: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            profiles: ProfileSettings::default(),
            strategy: Strategy::default(),
            fim: FimSettings::default(),
            humans: None,
            log_chains: true,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Copies the run seed into the build settings; call after any override.
    pub fn resolve(mut self) -> Self {
        let seed = self.seed;
        if let Some(b) = self.strategy.build_mut() {
            b.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.profiles.spread > 0.0 && self.profiles.spread.is_finite()) {
            return Err(invalid(format!(
                "profiles.spread must be > 0, got {}",
                self.profiles.spread
            )));
        }
        if self.profiles.dim < 2 {
            return Err(invalid(format!(
                "profiles.dim must be >= 2, got {}",
                self.profiles.dim
            )));
        }
        match &self.strategy {
            Strategy::Graphmind(p) => {
                p.build.validate()?;
                p.search.validate()?;
                if !(p.temperature > 0.0 && p.temperature.is_finite()) {
                    return Err(invalid(format!(
                        "temperature must be > 0, got {}",
                        p.temperature
                    )));
                }
            }
            Strategy::RandomMhop(p) => {
                p.build.validate()?;
                if p.m < 2 {
                    return Err(invalid(format!("m must be >= 2, got {}", p.m)));
                }
            }
            Strategy::ChungLu(p) => {
                if let Some(w) = &p.weights {
                    WeightSequence::new(w.clone())?;
                    if w.len() < 2 {
                        return Err(invalid("chung-lu needs at least 2 weights".into()));
                    }
                } else {
                    if p.n < 2 {
                        return Err(invalid(format!("chung-lu n must be >= 2, got {}", p.n)));
                    }
                    if !(p.exponent > 1.0 && p.w_min > 0.0) {
                        return Err(invalid("chung-lu needs exponent > 1 and w_min > 0".into()));
                    }
                }
            }
            Strategy::Kronecker(p) => {
                if !(1..=MAX_KRONECKER_POWER).contains(&p.k) {
                    return Err(invalid(format!(
                        "kronecker k must be in 1..={MAX_KRONECKER_POWER}"
                    )));
                }
            }
        }
        if let Some(h) = &self.humans {
            let Some(build) = self.strategy.build() else {
                return Err(invalid(format!(
                    "a human population needs a completion strategy, not {}",
                    self.strategy.name()
                )));
            };
            let k = h.n_communities.unwrap_or(build.n_communities);
            if k == 0 || k > h.n_humans {
                return Err(invalid(format!(
                    "need 1 <= human communities <= n_humans, got {k}"
                )));
            }
        }
        Ok(())
    }
}
