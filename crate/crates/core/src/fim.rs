//! Tie-strength inference and strength-conditioned interaction generation.
//!
//! Relationship levels run from 1 (strongest tie) to 4 (weakest). Each level
//! owns a categorical distribution over the four action kinds; stronger ties
//! favor costly actions (comment, retweet) and weaker ties favor likes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, NodeId};
use crate::profiles::{cosine, ProfileEmbedding, ProfileTable};
use crate::rng::stream_rng;

/// Action order used by every distribution: like, retweet, comment, follow.
pub const ACTIONS: [EdgeKind; 4] = [
    EdgeKind::Like,
    EdgeKind::Retweet,
    EdgeKind::Comment,
    EdgeKind::Follow,
];

/// Default additive smoothing per action for empirical distributions.
pub const DEFAULT_EPSILON: f64 = 1e-3;

const SUM_TOLERANCE: f64 = 1e-9;

fn action_index(kind: EdgeKind) -> usize {
    match kind {
        EdgeKind::Like => 0,
        EdgeKind::Retweet => 1,
        EdgeKind::Comment => 2,
        EdgeKind::Follow => 3,
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RelationshipLevel(u8);

impl RelationshipLevel {
    pub const ALL: [RelationshipLevel; 4] = [
        RelationshipLevel(1),
        RelationshipLevel(2),
        RelationshipLevel(3),
        RelationshipLevel(4),
    ];

    pub fn new(level: u8) -> Result<Self> {
        if (1..=4).contains(&level) {
            Ok(RelationshipLevel(level))
        } else {
            Err(Error::InvalidParameter(format!(
                "relationship level must be 1..=4, got {level}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for RelationshipLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        RelationshipLevel::new(v)
    }
}

impl From<RelationshipLevel> for u8 {
    fn from(l: RelationshipLevel) -> u8 {
        l.0
    }
}

/// Categorical distribution over [`ACTIONS`].
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ActionDistribution([f64; 4]);

impl ActionDistribution {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidTable(format!(
                "probabilities must be finite and >= 0: {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidTable(format!(
                "probabilities sum to {sum}, not 1: {p:?}"
            )));
        }
        Ok(ActionDistribution(p))
    }

    pub fn probabilities(&self) -> &[f64; 4] {
        &self.0
    }

    pub fn probability(&self, kind: EdgeKind) -> f64 {
        self.0[action_index(kind)]
    }

    /// Most likely action, earliest in [`ACTIONS`] on ties.
    pub fn argmax(&self) -> EdgeKind {
        let mut best = 0;
        for i in 1..4 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        ACTIONS[best]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> EdgeKind {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if x < acc {
                return ACTIONS[i];
            }
        }
        // rounding left a sliver above the cumulative sum
        let last = (0..4).rev().find(|&i| self.0[i] > 0.0).unwrap_or(0);
        ACTIONS[last]
    }
}

impl TryFrom<[f64; 4]> for ActionDistribution {
    type Error = Error;

    fn try_from(p: [f64; 4]) -> Result<Self> {
        ActionDistribution::new(p)
    }
}

impl From<ActionDistribution> for [f64; 4] {
    fn from(d: ActionDistribution) -> [f64; 4] {
        d.0
    }
}

/// Per-level action distributions, indexed by level 1..=4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ActionDistribution>", into = "Vec<ActionDistribution>")]
pub struct LevelTable([ActionDistribution; 4]);

impl LevelTable {
    pub fn new(rows: Vec<ActionDistribution>) -> Result<Self> {
        let found = rows.len();
        let rows: [ActionDistribution; 4] = rows.try_into().map_err(|_| {
            Error::InvalidTable(format!("expected rows for all 4 levels, found {found}"))
        })?;
        Ok(LevelTable(rows))
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self> {
        LevelTable::new(
            rows.into_iter()
                .map(ActionDistribution::new)
                .collect::<Result<_>>()?,
        )
    }

    pub fn row(&self, level: RelationshipLevel) -> &ActionDistribution {
        &self.0[(level.get() - 1) as usize]
    }
}

impl Default for LevelTable {
    /// Rows over (like, retweet, comment, follow). Comment+retweet mass falls
    /// and like mass rises from level 1 to level 4.
    fn default() -> Self {
        LevelTable::from_rows([
            [0.25, 0.30, 0.40, 0.05],
            [0.35, 0.25, 0.30, 0.10],
            [0.55, 0.15, 0.15, 0.15],
            [0.75, 0.05, 0.05, 0.15],
        ])
        .expect("default level table is valid")
    }
}

impl TryFrom<Vec<ActionDistribution>> for LevelTable {
    type Error = Error;

    fn try_from(rows: Vec<ActionDistribution>) -> Result<Self> {
        LevelTable::new(rows)
    }
}

impl From<LevelTable> for Vec<ActionDistribution> {
    fn from(t: LevelTable) -> Self {
        t.0.to_vec()
    }
}

/// Three strictly descending cosine cut-offs in `(-1, 1)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct LevelThresholds([f64; 3]);

impl LevelThresholds {
    pub const FALLBACK: LevelThresholds = LevelThresholds([0.8, 0.5, 0.2]);

    pub fn new(t: [f64; 3]) -> Result<Self> {
        let in_range = t.iter().all(|x| *x > -1.0 && *x < 1.0);
        if !in_range || !(t[0] > t[1] && t[1] > t[2]) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must be strictly descending within (-1, 1): {t:?}"
            )));
        }
        Ok(LevelThresholds(t))
    }

    pub fn values(&self) -> [f64; 3] {
        self.0
    }

    pub fn level_for(&self, cos: f64) -> RelationshipLevel {
        let level = match cos {
            c if c >= self.0[0] => 1,
            c if c >= self.0[1] => 2,
            c if c >= self.0[2] => 3,
            _ => 4,
        };
        RelationshipLevel(level)
    }

    /// 90th/70th/40th percentiles (linear interpolation) of cosine similarity
    /// over `samples` random distinct pairs. Falls back to
    /// [`LevelThresholds::FALLBACK`] when the table has fewer than two rows
    /// or the percentiles are not strictly descending.
    pub fn from_sample(profiles: &ProfileTable, samples: usize, seed: u64) -> LevelThresholds {
        let n = profiles.len();
        if n < 2 || samples == 0 {
            return LevelThresholds::FALLBACK;
        }
        let mut rng = stream_rng(seed, "fim/thresholds");
        let embeddings = profiles.embeddings();
        let mut cos: Vec<f64> = (0..samples)
            .map(|_| {
                let u = rng.random_range(0..n);
                let mut v = rng.random_range(0..n - 1);
                if v >= u {
                    v += 1;
                }
                embeddings[u].dot(&embeddings[v]).clamp(-1.0, 1.0)
            })
            .collect();
        cos.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (cos.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            cos[lo] + (cos[hi] - cos[lo]) * (pos - lo as f64)
        };
        LevelThresholds::new([q(0.9), q(0.7), q(0.4)]).unwrap_or(LevelThresholds::FALLBACK)
    }
}

impl TryFrom<[f64; 3]> for LevelThresholds {
    type Error = Error;

    fn try_from(t: [f64; 3]) -> Result<Self> {
        LevelThresholds::new(t)
    }
}

impl From<LevelThresholds> for [f64; 3] {
    fn from(t: LevelThresholds) -> Self {
        t.0
    }
}

pub fn infer_level(
    x_u: &ProfileEmbedding,
    x_v: &ProfileEmbedding,
    thresholds: &LevelThresholds,
) -> Result<RelationshipLevel> {
    Ok(thresholds.level_for(cosine(x_u, x_v)?))
}

pub fn level_action_distribution(
    level: RelationshipLevel,
    table: &LevelTable,
) -> ActionDistribution {
    *table.row(level)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub actor: NodeId,
    pub target: NodeId,
    #[serde(rename = "type")]
    pub kind: EdgeKind,
    #[serde(rename = "tweet_id")]
    pub tweet_ref: String,
}

/// `count` i.i.d. draws from the level's row. The stream is derived from
/// `(seed, u, v)` so edges can be generated in any order.
pub fn generate_interactions(
    u: NodeId,
    v: NodeId,
    level: RelationshipLevel,
    count: usize,
    table: &LevelTable,
    seed: u64,
) -> Vec<InteractionRecord> {
    let dist = table.row(level);
    let mut rng = stream_rng(seed, &format!("fim/{u}/{v}"));
    (0..count)
        .map(|i| InteractionRecord {
            actor: u,
            target: v,
            kind: dist.sample(&mut rng),
            tweet_ref: format!("t-{u}-{v}-{i}"),
        })
        .collect()
}

pub fn reward_r1(predicted: RelationshipLevel, truth: RelationshipLevel) -> f64 {
    let delta = (predicted.get() as i32 - truth.get() as i32).abs();
    (-(delta as f64)).exp()
}

/// Per-kind counts plus `epsilon` pseudo-counts, normalized.
pub fn empirical_distribution(
    records: &[InteractionRecord],
    epsilon: f64,
) -> Result<ActionDistribution> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    if records.is_empty() && epsilon == 0.0 {
        return Err(Error::EmptyRecords);
    }
    let mut counts = [epsilon; 4];
    for r in records {
        counts[action_index(r.kind)] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    ActionDistribution::new(counts.map(|c| c / total))
}

/// `-KL(p_gen || p_ref)` in nats; zero-mass terms of `p_gen` contribute zero.
pub fn reward_r2(p_gen: &ActionDistribution, p_ref: &ActionDistribution) -> Result<f64> {
    let mut kl = 0.0;
    for ((&p, &q), kind) in p_gen.0.iter().zip(&p_ref.0).zip(ACTIONS) {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::InfiniteDivergence(kind.as_str()));
        }
        kl += p * (p / q).ln();
    }
    Ok(if kl > 0.0 { -kl } else { 0.0 })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FimReward {
    pub r1: f64,
    pub r2: f64,
    pub total: f64,
}

pub fn reward_fine(
    predicted: RelationshipLevel,
    truth: RelationshipLevel,
    p_gen: &ActionDistribution,
    p_ref: &ActionDistribution,
) -> Result<FimReward> {
    let r1 = reward_r1(predicted, truth);
    let r2 = reward_r2(p_gen, p_ref)?;
    Ok(FimReward {
        r1,
        r2,
        total: r1 + r2,
    })
}
