//! Comparison generators: random m-hop completion, Chung–Lu and stochastic
//! Kronecker graphs.
//!
//! RNG discipline:
//! - Chung–Lu draws exactly one `f64` per ordered pair `(i, j)`, `i != j`, in
//!   row-major order from the `"chung-lu"` stream.
//! - Kronecker tests pair `(i, j)` against the counter-based uniform
//!   [`pair_uniform`]`(stream_seed(seed, "kronecker"), i, j)`, so the
//!   recursive and naive samplers agree regardless of visiting order. Edge
//!   probabilities multiply initiator entries from the most significant bit
//!   down.

use log::warn;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Zeta};
use serde::{Deserialize, Serialize};

use crate::builder::{complete_multi_hop, Completion, CompletionOptions, CompletionPolicy};
use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::gsi::MAX_HOPS;
use crate::profiles::ProfileTable;
use crate::rng::{pair_uniform, stream_rng, stream_seed, StreamRng};

/// Joins each pair through `m - 2` uniformly chosen distinct intermediates.
#[derive(Copy, Clone, Debug)]
pub struct RandomMhopPolicy {
    m: usize,
}

impl RandomMhopPolicy {
    /// `m` counts nodes on the chain, endpoints included.
    pub fn new(m: usize) -> Result<Self> {
        if !(2..=MAX_HOPS + 1).contains(&m) {
            return Err(Error::InvalidParameter(format!(
                "m must be in 2..={}, got {m}",
                MAX_HOPS + 1
            )));
        }
        Ok(RandomMhopPolicy { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }
}

impl CompletionPolicy for RandomMhopPolicy {
    fn name(&self) -> &'static str {
        "random-mhop"
    }

    fn propose(
        &mut self,
        g: &SocialGraph,
        source: NodeId,
        target: NodeId,
        rng: &mut StreamRng,
    ) -> Result<Option<Vec<NodeId>>> {
        let n = g.node_count();
        let k = self.m - 2;
        if k > n.saturating_sub(2) {
            return Err(Error::InsufficientNodes(format!(
                "{k} intermediates requested but only {} nodes besides the endpoints",
                n.saturating_sub(2)
            )));
        }
        // indices into V \ {source, target}, mapped back by skipping endpoints
        let (lo, hi) = if source < target {
            (source, target)
        } else {
            (target, source)
        };
        let mut path = Vec::with_capacity(self.m);
        path.push(source);
        for idx in sample(rng, n - 2, k) {
            let mut v = idx;
            if v >= lo.index() {
                v += 1;
            }
            if v >= hi.index() {
                v += 1;
            }
            path.push(NodeId::from(v));
        }
        path.push(target);
        Ok(Some(path))
    }
}

/// Completion loop with random m-hop chains.
pub fn random_mhop_completion(
    g: &mut SocialGraph,
    profiles: &ProfileTable,
    m: usize,
    opts: &CompletionOptions,
) -> Result<Completion> {
    let mut policy = RandomMhopPolicy::new(m)?;
    if m - 2 > g.node_count().saturating_sub(2) {
        return Err(Error::InsufficientNodes(format!(
            "m = {m} needs {} intermediates, graph has {} nodes",
            m - 2,
            g.node_count()
        )));
    }
    complete_multi_hop(g, profiles, &mut policy, opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightSequence(Vec<f64>);

impl WeightSequence {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "weights must be positive and finite, found {w}"
            )));
        }
        let seq = WeightSequence(weights);
        if seq.has_capped_pairs() {
            warn!("max weight squared exceeds the weight sum; some Chung-Lu probabilities are capped at 1");
        }
        Ok(seq)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether `max(w)^2 >= sum(w)`, i.e. some pair probability hits the cap.
    pub fn has_capped_pairs(&self) -> bool {
        let sum: f64 = self.0.iter().sum();
        let max = self.0.iter().copied().fold(0.0, f64::max);
        max * max >= sum
    }
}

/// `n` weights `w_min * k` with `k` drawn from a discrete power law
/// `P(k) ∝ k^-exponent`, `k >= 1`.
pub fn power_law_weights(n: usize, exponent: f64, w_min: f64, seed: u64) -> Result<WeightSequence> {
    let zeta = Zeta::new(exponent)
        .map_err(|e| Error::InvalidParameter(format!("power-law exponent {exponent}: {e}")))?;
    let mut rng = stream_rng(seed, "chung-lu/weights");
    WeightSequence::new((0..n).map(|_| w_min * zeta.sample(&mut rng)).collect())
}

/// Directed Chung–Lu graph: edge `i -> j` with probability
/// `min(1, w_i * w_j / sum(w))`.
pub fn chung_lu(weights: &WeightSequence, seed: u64) -> Result<SocialGraph> {
    let w = weights.weights();
    let n = w.len();
    if n < 2 {
        return Err(Error::DegenerateGraph { node_count: n });
    }
    let total: f64 = w.iter().sum();
    let mut rng = stream_rng(seed, "chung-lu");
    let mut g = SocialGraph::new(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = (w[i] * w[j] / total).min(1.0);
            let u: f64 = rng.random();
            if u < p {
                g.add_follow_edge(NodeId::from(i), NodeId::from(j))?;
            }
        }
    }
    Ok(g)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct KroneckerInitiator([[f64; 2]; 2]);

impl KroneckerInitiator {
    pub fn new(matrix: [[f64; 2]; 2]) -> Result<Self> {
        if matrix.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "initiator entries must lie in [0, 1]: {matrix:?}"
            )));
        }
        Ok(KroneckerInitiator(matrix))
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.0
    }

    /// Expected number of non-self edges of the `k`-th power.
    pub fn expected_edges(&self, k: u32) -> f64 {
        let m = self.0;
        let all = m[0][0] + m[0][1] + m[1][0] + m[1][1];
        let diag = m[0][0] + m[1][1];
        all.powi(k as i32) - diag.powi(k as i32)
    }

    /// Edge probability of `(i, j)` in the `k`-th power.
    pub fn pair_probability(&self, i: usize, j: usize, k: u32) -> f64 {
        let mut p = 1.0;
        for t in (0..k).rev() {
            p *= self.0[(i >> t) & 1][(j >> t) & 1];
        }
        p
    }
}

impl Default for KroneckerInitiator {
    fn default() -> Self {
        KroneckerInitiator([[0.9, 0.5], [0.5, 0.2]])
    }
}

impl TryFrom<[[f64; 2]; 2]> for KroneckerInitiator {
    type Error = Error;

    fn try_from(m: [[f64; 2]; 2]) -> Result<Self> {
        KroneckerInitiator::new(m)
    }
}

impl From<KroneckerInitiator> for [[f64; 2]; 2] {
    fn from(k: KroneckerInitiator) -> Self {
        k.0
    }
}

pub const MAX_KRONECKER_POWER: u32 = 20;

fn check_power(k: u32) -> Result<usize> {
    if !(1..=MAX_KRONECKER_POWER).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "Kronecker power must be in 1..={MAX_KRONECKER_POWER}, got {k}"
        )));
    }
    Ok(1usize << k)
}

fn graph_from_sorted(n: usize, mut edges: Vec<(u32, u32)>) -> Result<SocialGraph> {
    edges.sort_unstable();
    SocialGraph::from_follows(n, edges)
}

/// Stochastic Kronecker graph on `2^k` nodes via recursive quadrant descent.
///
/// Blocks whose accumulated probability is zero are skipped entirely. Edges
/// are inserted in row-major order.
pub fn kronecker(initiator: &KroneckerInitiator, k: u32, seed: u64) -> Result<SocialGraph> {
    let n = check_power(k)?;
    let stream = stream_seed(seed, "kronecker");
    let mut edges = Vec::new();
    descend(&initiator.0, k, 0, 0, 0, 1.0, stream, &mut edges);
    graph_from_sorted(n, edges)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    m: &[[f64; 2]; 2],
    k: u32,
    level: u32,
    i: u64,
    j: u64,
    p: f64,
    stream: u64,
    out: &mut Vec<(u32, u32)>,
) {
    if p == 0.0 {
        return;
    }
    if level == k {
        if i != j && pair_uniform(stream, i, j) < p {
            out.push((i as u32, j as u32));
        }
        return;
    }
    for a in 0..2 {
        for b in 0..2 {
            descend(
                m,
                k,
                level + 1,
                i * 2 + a as u64,
                j * 2 + b as u64,
                p * m[a][b],
                stream,
                out,
            );
        }
    }
}

/// Reference sampler: every ordered pair tested independently, row-major.
pub fn kronecker_naive(initiator: &KroneckerInitiator, k: u32, seed: u64) -> Result<SocialGraph> {
    let n = check_power(k)?;
    let stream = stream_seed(seed, "kronecker");
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j
                && pair_uniform(stream, i as u64, j as u64) < initiator.pair_probability(i, j, k)
            {
                edges.push((i as u32, j as u32));
            }
        }
    }
    graph_from_sorted(n, edges)
}
