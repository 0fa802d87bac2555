//! Profile embeddings, synthetic community-structured profiles, and the
//! JSON-lines profile format.
//!
//! Every stored embedding is unit-norm, so cosine similarity is a dot product.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::io::{open_maybe_gz, MaybeGzWriter};
use crate::rng::stream_rng;

pub const DEFAULT_DIM: usize = 32;

/// Norm deviation below which a loaded vector is kept as-is.
const RENORMALIZE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProfileEmbedding(Vec<f64>);

impl ProfileEmbedding {
    /// Normalizes `values` to unit L2 norm.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let norm = l2(&values)?;
        Ok(ProfileEmbedding(
            values.into_iter().map(|x| x / norm).collect(),
        ))
    }

    /// Like [`ProfileEmbedding::new`], but leaves vectors that are already
    /// unit-norm to within `1e-12` untouched so export/load round-trips are exact.
    pub fn from_stored(values: Vec<f64>) -> Result<Self> {
        let norm = l2(&values)?;
        if (norm - 1.0).abs() < RENORMALIZE_SLACK {
            Ok(ProfileEmbedding(values))
        } else {
            Ok(ProfileEmbedding(
                values.into_iter().map(|x| x / norm).collect(),
            ))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub(crate) fn dot(&self, other: &ProfileEmbedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

fn l2(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty embedding".into()));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "embedding has non-finite entries".into(),
        ));
    }
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidParameter(
            "embedding has zero or infinite norm".into(),
        ));
    }
    Ok(norm)
}

/// Cosine similarity of two unit embeddings, clamped to `[-1, 1]`.
pub fn cosine(a: &ProfileEmbedding, b: &ProfileEmbedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(a.dot(b).clamp(-1.0, 1.0))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Human,
    Bot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    dim: usize,
    embeddings: Vec<ProfileEmbedding>,
    communities: Vec<Option<u32>>,
    populations: Vec<Population>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRecord {
    id: u32,
    label: Population,
    community: Option<u32>,
    embedding: Vec<f64>,
}

impl ProfileTable {
    pub fn new(
        embeddings: Vec<ProfileEmbedding>,
        communities: Vec<Option<u32>>,
        populations: Vec<Population>,
    ) -> Result<Self> {
        let n = embeddings.len();
        if communities.len() != n || populations.len() != n {
            return Err(Error::InvalidParameter(format!(
                "profile columns disagree: {n} embeddings, {} communities, {} labels",
                communities.len(),
                populations.len()
            )));
        }
        let dim = embeddings.first().map_or(0, ProfileEmbedding::dim);
        if let Some(bad) = embeddings.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(ProfileTable {
            dim,
            embeddings,
            communities,
            populations,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embedding(&self, id: NodeId) -> Result<&ProfileEmbedding> {
        self.embeddings
            .get(id.index())
            .ok_or(Error::MissingProfile(id))
    }

    pub fn embeddings(&self) -> &[ProfileEmbedding] {
        &self.embeddings
    }

    pub fn community(&self, id: NodeId) -> Option<u32> {
        self.communities.get(id.index()).copied().flatten()
    }

    pub fn communities(&self) -> &[Option<u32>] {
        &self.communities
    }

    pub fn population(&self, id: NodeId) -> Option<Population> {
        self.populations.get(id.index()).copied()
    }

    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    /// Number of distinct community labels.
    pub fn community_count(&self) -> usize {
        let mut labels: Vec<u32> = self.communities.iter().flatten().copied().collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    pub fn set_communities(&mut self, labels: &[u32]) -> Result<()> {
        if labels.len() != self.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} profiles",
                labels.len(),
                self.len()
            )));
        }
        self.communities = labels.iter().map(|&l| Some(l)).collect();
        Ok(())
    }

    pub fn set_population(&mut self, population: Population) {
        self.populations.iter_mut().for_each(|p| *p = population);
    }

    /// Cosine similarity between two nodes' profiles.
    pub fn similarity(&self, u: NodeId, v: NodeId) -> Result<f64> {
        cosine(self.embedding(u)?, self.embedding(v)?)
    }

    /// Concatenates `other` after `self`, shifting its community labels by
    /// `community_offset`.
    pub fn concat(&self, other: &ProfileTable, community_offset: u32) -> Result<ProfileTable> {
        if !self.is_empty() && !other.is_empty() && self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut embeddings = self.embeddings.clone();
        embeddings.extend(other.embeddings.iter().cloned());
        let mut communities = self.communities.clone();
        communities.extend(
            other
                .communities
                .iter()
                .map(|c| c.map(|c| c + community_offset)),
        );
        let mut populations = self.populations.clone();
        populations.extend_from_slice(&other.populations);
        ProfileTable::new(embeddings, communities, populations)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, e) in self.embeddings.iter().enumerate() {
            let rec = ProfileRecord {
                id: i as u32,
                label: self.populations[i],
                community: self.communities[i],
                embedding: e.0.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads the JSON-lines profile schema. Ids must be unique and dense.
    pub fn read_jsonl<R: BufRead>(input: R, path: &Path) -> Result<ProfileTable> {
        let malformed = |line: usize, message: String| Error::Malformed {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ProfileRecord =
                serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))?;
            records.push((i + 1, rec));
        }
        let dim = records.first().map_or(0, |(_, r)| r.embedding.len());
        for (line, r) in &records {
            if r.embedding.len() != dim {
                return Err(malformed(
                    *line,
                    format!(
                        "embedding dimension {} differs from {dim}",
                        r.embedding.len()
                    ),
                ));
            }
        }
        records.sort_by_key(|(_, r)| r.id);
        let n = records.len();
        let mut embeddings = Vec::with_capacity(n);
        let mut communities = Vec::with_capacity(n);
        let mut populations = Vec::with_capacity(n);
        for (expected, (line, r)) in records.into_iter().enumerate() {
            if r.id as usize != expected {
                return Err(malformed(
                    line,
                    format!(
                        "node ids are not dense: expected {expected}, found {}",
                        r.id
                    ),
                ));
            }
            embeddings.push(
                ProfileEmbedding::from_stored(r.embedding)
                    .map_err(|e| malformed(line, e.to_string()))?,
            );
            communities.push(r.community);
            populations.push(r.label);
        }
        ProfileTable::new(embeddings, communities, populations)
    }
}

/// Reads a profile file; `.gz` paths are decompressed.
pub fn load_profiles(path: &Path) -> Result<ProfileTable> {
    let reader = open_maybe_gz(path)?;
    ProfileTable::read_jsonl(reader, path)
}

pub fn save_profiles(table: &ProfileTable, path: &Path) -> Result<()> {
    let mut w = MaybeGzWriter::create(path)?;
    table.write_jsonl(&mut w)?;
    w.finish()
}

fn random_unit<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-24 {
            return v;
        }
    }
}

/// Community-structured synthetic profiles.
///
/// `n_communities` centroids are drawn uniformly on the unit sphere; node `i`
/// belongs to community `i % n_communities` and its embedding is
/// `normalize(centroid + N(0, intra_spread^2 I))`. All nodes are labelled
/// [`Population::Bot`]; use [`ProfileTable::set_population`] to relabel.
pub fn synth_profiles(
    n: usize,
    n_communities: usize,
    d: usize,
    intra_spread: f64,
    seed: u64,
) -> Result<ProfileTable> {
    if n_communities == 0 || n < n_communities {
        return Err(Error::InvalidParameter(format!(
            "need n >= n_communities >= 1, got n={n}, n_communities={n_communities}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!(
            "embedding dimension must be >= 2, got {d}"
        )));
    }
    if !(intra_spread > 0.0 && intra_spread.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "intra_spread must be > 0, got {intra_spread}"
        )));
    }
    let mut rng = stream_rng(seed, "synth-profiles");
    let centroids: Vec<ProfileEmbedding> = (0..n_communities)
        .map(|_| ProfileEmbedding::new(random_unit(&mut rng, d)))
        .collect::<Result<_>>()?;
    let mut embeddings = Vec::with_capacity(n);
    let mut communities = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % n_communities;
        let centroid = centroids[c].as_slice();
        let raw: Vec<f64> = centroid
            .iter()
            .map(|&x| x + intra_spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        embeddings.push(ProfileEmbedding::new(raw)?);
        communities.push(Some(c as u32));
    }
    ProfileTable::new(embeddings, communities, vec![Population::Bot; n])
}
