//! Similarity- and influence-guided multi-hop chains.
//!
//! A candidate `v` reached from an anchor is scored as
//! `cos(x_anchor, x_v) + d(v)` where `d(v)` is `v`'s in-degree divided by the
//! largest in-degree in the current candidate set. Chains are scored, rewarded
//! and serialized here; the completion loop that materializes them lives in
//! [`crate::builder`].

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::profiles::ProfileTable;

/// Longest chain, in hops.
pub const MAX_HOPS: usize = 6;

/// Distinct nodes `[v0, ..., vk]` with `1 <= k <= 6`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Chain(Vec<NodeId>);

impl Chain {
    pub fn new(nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::ChainTooShort {
                len: nodes.len(),
                required: 2,
            });
        }
        if nodes.len() > MAX_HOPS + 1 {
            return Err(Error::InvalidChain(format!(
                "{} nodes exceeds the {MAX_HOPS}-hop limit",
                nodes.len()
            )));
        }
        let mut sorted = nodes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidChain("repeated node".into()));
        }
        Ok(Chain(nodes))
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn hops(&self) -> usize {
        self.0.len() - 1
    }

    pub fn source(&self) -> NodeId {
        self.0[0]
    }

    pub fn target(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    /// Consecutive `(from, to)` follow edges.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    fn interior(&self) -> &[NodeId] {
        &self.0[1..self.0.len() - 1]
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsiReward {
    #[serde(rename = "len")]
    pub r_len: f64,
    #[serde(rename = "homo")]
    pub r_homo: f64,
    #[serde(rename = "inf")]
    pub r_inf: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct ChainGroup {
    chains: Vec<Chain>,
    rewards: Vec<GsiReward>,
}

impl ChainGroup {
    pub fn new(chains: Vec<Chain>, rewards: Vec<GsiReward>) -> Result<Self> {
        if chains.len() != rewards.len() {
            return Err(Error::InvalidParameter(format!(
                "{} chains but {} rewards",
                chains.len(),
                rewards.len()
            )));
        }
        if chains.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "a chain group needs at least 2 members, got {}",
                chains.len()
            )));
        }
        let (s, t) = (chains[0].source(), chains[0].target());
        if chains.iter().any(|c| c.source() != s || c.target() != t) {
            return Err(Error::InvalidParameter(
                "chains in a group must share source and target".into(),
            ));
        }
        Ok(ChainGroup { chains, rewards })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn rewards(&self) -> &[GsiReward] {
        &self.rewards
    }
}

fn ratio(degree: usize, max: usize) -> f64 {
    if max == 0 {
        0.0
    } else {
        degree as f64 / max as f64
    }
}

fn max_in_degree(g: &SocialGraph, set: &[NodeId]) -> usize {
    set.iter().map(|&u| g.in_degree(u)).max().unwrap_or(0)
}

/// In-degree of `v` relative to the largest in-degree among `candidates`.
/// Zero when every candidate has in-degree zero.
pub fn normalized_in_degree(g: &SocialGraph, v: NodeId, candidates: &[NodeId]) -> Result<f64> {
    if !candidates.contains(&v) {
        return Err(Error::NotACandidate(v));
    }
    for &c in candidates {
        g.check_node(c)?;
    }
    Ok(ratio(g.in_degree(v), max_in_degree(g, candidates)))
}

pub fn score_candidate(
    anchor: NodeId,
    v: NodeId,
    candidates: &[NodeId],
    g: &SocialGraph,
    profiles: &ProfileTable,
) -> Result<f64> {
    let d = normalized_in_degree(g, v, candidates)?;
    Ok(profiles.similarity(anchor, v)? + d)
}

/// Candidate set for [`extend_chain_greedy`]: out-neighbors of the current
/// node not yet on the chain.
pub fn unvisited_out_neighbors(
    g: &SocialGraph,
) -> impl FnMut(NodeId, &[NodeId]) -> Vec<NodeId> + '_ {
    move |current, visited| {
        g.out_neighbors(current)
            .iter()
            .copied()
            .filter(|v| !visited.contains(v))
            .collect()
    }
}

/// Grows a chain from `anchor`, each step taking the best-scoring candidate
/// (score anchored at `anchor`, ties to the smallest id). Stops after
/// `max_hops` hops or when no candidate remains. `Ok(None)` means the anchor
/// could not be extended at all.
pub fn extend_chain_greedy<F>(
    g: &SocialGraph,
    profiles: &ProfileTable,
    anchor: NodeId,
    mut candidate_fn: F,
    max_hops: usize,
) -> Result<Option<Chain>>
where
    F: FnMut(NodeId, &[NodeId]) -> Vec<NodeId>,
{
    g.check_node(anchor)?;
    let max_hops = max_hops.min(MAX_HOPS);
    let mut nodes = vec![anchor];
    while nodes.len() <= max_hops {
        let current = *nodes.last().unwrap();
        let mut candidates: Vec<NodeId> = candidate_fn(current, &nodes)
            .into_iter()
            .filter(|v| !nodes.contains(v))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.is_empty() {
            break;
        }
        let max_in = max_in_degree(g, &candidates);
        let mut best: Option<(f64, NodeId)> = None;
        for &v in &candidates {
            let s = profiles.similarity(anchor, v)? + ratio(g.in_degree(v), max_in);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, v));
            }
        }
        nodes.push(best.unwrap().1);
    }
    if nodes.len() < 2 {
        Ok(None)
    } else {
        Chain::new(nodes).map(Some)
    }
}

/// Where intermediate nodes of a proposed path may come from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    /// Any pool node not yet on the path.
    #[default]
    AllNodes,
    /// Only existing out-neighbors of the current node (the final hop to the
    /// target is always allowed).
    OutNeighbors,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PoolScope {
    /// Nodes sharing the source's or the target's community.
    #[default]
    Communities,
    Global,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSearch {
    pub min_hops: usize,
    pub max_hops: usize,
    /// `None` searches exhaustively.
    pub beam_width: Option<usize>,
    pub candidates: CandidateMode,
    pub pool: PoolScope,
}

impl Default for PathSearch {
    fn default() -> Self {
        PathSearch {
            min_hops: 3,
            max_hops: MAX_HOPS,
            beam_width: Some(8),
            candidates: CandidateMode::AllNodes,
            pool: PoolScope::Communities,
        }
    }
}

impl PathSearch {
    pub fn exhaustive() -> Self {
        PathSearch {
            beam_width: None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_hops < 1 || self.min_hops > self.max_hops || self.max_hops > MAX_HOPS {
            return Err(Error::InvalidParameter(format!(
                "hop bounds must satisfy 1 <= min_hops <= max_hops <= {MAX_HOPS}, got [{}, {}]",
                self.min_hops, self.max_hops
            )));
        }
        if self.beam_width == Some(0) {
            return Err(Error::InvalidParameter(
                "beam_width must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Intermediate-node pool for a `source -> target` path, in ascending id order.
pub fn intermediate_pool(
    g: &SocialGraph,
    profiles: &ProfileTable,
    source: NodeId,
    target: NodeId,
    search: &PathSearch,
) -> Vec<NodeId> {
    let global = || -> Vec<NodeId> { g.nodes().filter(|&v| v != source && v != target).collect() };
    match (
        search.pool,
        profiles.community(source),
        profiles.community(target),
    ) {
        (PoolScope::Communities, Some(cs), Some(ct)) => {
            let pool: Vec<NodeId> = g
                .nodes()
                .filter(|&v| v != source && v != target)
                .filter(|&v| matches!(profiles.community(v), Some(c) if c == cs || c == ct))
                .collect();
            // a pool too small to host a path falls back to every node
            if pool.len() + 1 < search.min_hops {
                global()
            } else {
                pool
            }
        }
        _ => global(),
    }
}

struct PathContext<'a> {
    g: &'a SocialGraph,
    pool: Vec<NodeId>,
    sim: Vec<f64>,
    mode: CandidateMode,
}

impl<'a> PathContext<'a> {
    fn new(
        g: &'a SocialGraph,
        profiles: &ProfileTable,
        source: NodeId,
        target: NodeId,
        search: &PathSearch,
    ) -> Result<Self> {
        let pool = intermediate_pool(g, profiles, source, target, search);
        let sim = pool
            .iter()
            .map(|&v| profiles.similarity(source, v))
            .collect::<Result<Vec<f64>>>()?;
        Ok(PathContext {
            g,
            pool,
            sim,
            mode: search.candidates,
        })
    }

    /// Indices into `pool` available after the intermediates `chosen`, with
    /// `current` the last node on the path.
    fn candidates(&self, current: NodeId, chosen: &[usize]) -> Vec<usize> {
        (0..self.pool.len())
            .filter(|i| !chosen.contains(i))
            .filter(|&i| match self.mode {
                CandidateMode::AllNodes => true,
                CandidateMode::OutNeighbors => self.g.has_follow(current, self.pool[i]),
            })
            .collect()
    }

    /// `(pool index, score)` for each candidate of the next step.
    fn scored(&self, current: NodeId, chosen: &[usize]) -> Vec<(usize, f64)> {
        let cands = self.candidates(current, chosen);
        let max_in = cands
            .iter()
            .map(|&i| self.g.in_degree(self.pool[i]))
            .max()
            .unwrap_or(0);
        cands
            .into_iter()
            .map(|i| {
                (
                    i,
                    self.sim[i] + ratio(self.g.in_degree(self.pool[i]), max_in),
                )
            })
            .collect()
    }

    fn nodes(&self, source: NodeId, target: NodeId, chosen: &[usize]) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(chosen.len() + 2);
        nodes.push(source);
        nodes.extend(chosen.iter().map(|&i| self.pool[i]));
        nodes.push(target);
        nodes
    }
}

#[derive(Clone)]
struct Partial {
    chosen: Vec<usize>,
    ids: Vec<NodeId>,
    score: f64,
}

/// Higher score first, then lexicographically smaller id sequence.
fn rank(a_score: f64, a_ids: &[NodeId], b_score: f64, b_ids: &[NodeId]) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_ids.cmp(b_ids))
}

/// A proposed path together with its objective value.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPath {
    pub chain: Chain,
    /// Sum of per-step candidate scores over the intermediates.
    pub score: f64,
}

/// Beam search for a `source -> target` path of `min_hops..=max_hops` hops.
///
/// Intermediates come from [`intermediate_pool`]; the objective is the sum of
/// per-step scores anchored at `source`, where each step normalizes in-degree
/// over that step's candidate set. The path's edges need not exist yet.
/// Returns `Ok(None)` when no admissible path exists.
pub fn generate_path(
    g: &SocialGraph,
    profiles: &ProfileTable,
    source: NodeId,
    target: NodeId,
    search: &PathSearch,
) -> Result<Option<ScoredPath>> {
    search.validate()?;
    g.check_node(source)?;
    g.check_node(target)?;
    if source == target {
        return Err(Error::InvalidParameter(
            "path source and target must differ".into(),
        ));
    }
    let ctx = PathContext::new(g, profiles, source, target, search)?;
    let need = search.min_hops - 1;
    if ctx.pool.len() < need {
        return Ok(None);
    }
    let width = search.beam_width.unwrap_or(usize::MAX);

    let mut best: Option<Partial> = None;
    let mut offer = |p: &Partial| {
        if best
            .as_ref()
            .is_none_or(|b| rank(p.score, &p.ids, b.score, &b.ids) == Ordering::Less)
        {
            best = Some(p.clone());
        }
    };

    let mut beam = vec![Partial {
        chosen: Vec::new(),
        ids: Vec::new(),
        score: 0.0,
    }];
    if need == 0 {
        offer(&Partial {
            chosen: Vec::new(),
            ids: ctx.nodes(source, target, &[]),
            score: 0.0,
        });
    }
    for depth in 1..search.max_hops {
        let mut next = Vec::new();
        for p in &beam {
            let current = p.chosen.last().map_or(source, |&i| ctx.pool[i]);
            for (i, s) in ctx.scored(current, &p.chosen) {
                let mut chosen = p.chosen.clone();
                chosen.push(i);
                let ids = ctx.nodes(source, target, &chosen);
                next.push(Partial {
                    chosen,
                    ids,
                    score: p.score + s,
                });
            }
        }
        if next.is_empty() {
            break;
        }
        if next.len() > width {
            next.sort_by(|a, b| rank(a.score, &a.ids, b.score, &b.ids));
            next.truncate(width);
        }
        if depth >= need {
            for p in &next {
                offer(p);
            }
        }
        beam = next;
    }
    match best {
        Some(p) => Ok(Some(ScoredPath {
            chain: Chain::new(p.ids)?,
            score: p.score,
        })),
        None => Ok(None),
    }
}

/// Draws one path by softmax sampling (`exp(score / temperature)`) at each
/// step; the hop count is uniform over `min_hops..=max_hops`.
pub fn sample_path<R: Rng + ?Sized>(
    g: &SocialGraph,
    profiles: &ProfileTable,
    source: NodeId,
    target: NodeId,
    search: &PathSearch,
    temperature: f64,
    rng: &mut R,
) -> Result<Option<Chain>> {
    search.validate()?;
    if source == target {
        return Err(Error::InvalidParameter(
            "path source and target must differ".into(),
        ));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let ctx = PathContext::new(g, profiles, source, target, search)?;
    let hops = rng.random_range(search.min_hops..=search.max_hops);
    let mut chosen = Vec::with_capacity(hops - 1);
    while chosen.len() < hops - 1 {
        let current = chosen.last().map_or(source, |&i| ctx.pool[i]);
        let scored = ctx.scored(current, &chosen);
        if scored.is_empty() {
            break;
        }
        let top = scored
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scored
            .iter()
            .map(|&(_, s)| ((s - top) / temperature).exp())
            .collect();
        let mut x = rng.random::<f64>() * weights.iter().sum::<f64>();
        let mut pick = scored.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if x < *w {
                pick = k;
                break;
            }
            x -= w;
        }
        chosen.push(scored[pick].0);
    }
    if chosen.len() + 1 < search.min_hops {
        return Ok(None);
    }
    Chain::new(ctx.nodes(source, target, &chosen)).map(Some)
}

pub fn reward_len(c: &Chain) -> f64 {
    (c.len() - 1) as f64 / MAX_HOPS as f64
}

/// Mean cosine to the anchor over every chain node, the anchor included.
pub fn reward_homo(c: &Chain, profiles: &ProfileTable) -> Result<f64> {
    let anchor = c.source();
    let mut sum = 0.0;
    for &v in c.nodes() {
        sum += profiles.similarity(anchor, v)?;
    }
    Ok(sum / c.len() as f64)
}

/// Mean normalized in-degree of the interior nodes, normalized over the
/// interior set itself.
pub fn reward_inf(c: &Chain, g: &SocialGraph) -> Result<f64> {
    if c.len() < 3 {
        return Err(Error::ChainTooShort {
            len: c.len(),
            required: 3,
        });
    }
    let interior = c.interior();
    for &v in interior {
        g.check_node(v)?;
    }
    let max_in = max_in_degree(g, interior);
    let sum: f64 = interior
        .iter()
        .map(|&v| ratio(g.in_degree(v), max_in))
        .sum();
    Ok(sum / interior.len() as f64)
}

pub fn reward_gsi(c: &Chain, g: &SocialGraph, profiles: &ProfileTable) -> Result<GsiReward> {
    let r_inf = reward_inf(c, g)?;
    let r_len = reward_len(c);
    let r_homo = reward_homo(c, profiles)?;
    Ok(GsiReward {
        r_len,
        r_homo,
        r_inf,
        total: r_len + r_homo + r_inf,
    })
}

/// Index of the member with the largest group-normalized advantage
/// `(total - mean) / std`; all advantages are zero when `std == 0`. Ties go to
/// the first member.
pub fn select_best_of_n(group: &ChainGroup) -> usize {
    let totals: Vec<f64> = group.rewards.iter().map(|r| r.total).collect();
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let std = (totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let advantage = |t: f64| if std > 0.0 { (t - mean) / std } else { 0.0 };
    let mut best = 0;
    for (i, &t) in totals.iter().enumerate().skip(1) {
        if advantage(t) > advantage(totals[best]) {
            best = i;
        }
    }
    best
}

/// Builds a group from the beam-search path plus `group_size - 1` sampled
/// paths, all scored with [`reward_gsi`].
#[allow(clippy::too_many_arguments)]
pub fn generate_group<R: Rng + ?Sized>(
    g: &SocialGraph,
    profiles: &ProfileTable,
    source: NodeId,
    target: NodeId,
    search: &PathSearch,
    group_size: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<Option<ChainGroup>> {
    let Some(first) = generate_path(g, profiles, source, target, search)? else {
        return Ok(None);
    };
    let mut chains = vec![first.chain];
    while chains.len() < group_size.max(2) {
        match sample_path(g, profiles, source, target, search, temperature, rng)? {
            Some(c) => chains.push(c),
            None => chains.push(chains[0].clone()),
        }
    }
    let rewards = chains
        .iter()
        .map(|c| reward_gsi(c, g, profiles))
        .collect::<Result<Vec<_>>>()?;
    ChainGroup::new(chains, rewards).map(Some)
}

/// Renders a chain as alternating user tokens and hop rationales, e.g.
/// `<user>3</user> follows due to similarity 0.8123 and relative in-degree 0.5000 <user>7</user>`.
///
/// For hop `a -> b` the similarity is `cos(x_a, x_b)` and the relative
/// in-degree is `b`'s in-degree over the largest in-degree among the followed
/// nodes `v1..vk`.
pub fn serialize_chain(c: &Chain, g: &SocialGraph, profiles: &ProfileTable) -> Result<String> {
    let followed = &c.nodes()[1..];
    for &v in c.nodes() {
        g.check_node(v)?;
    }
    let max_in = max_in_degree(g, followed);
    let mut out = String::new();
    write!(out, "<user>{}</user>", c.source()).unwrap();
    for (a, b) in c.edges() {
        let s = profiles.similarity(a, b)?;
        let d = ratio(g.in_degree(b), max_in);
        write!(
            out,
            " follows due to similarity {s:.4} and relative in-degree {d:.4} <user>{b}</user>"
        )
        .unwrap();
    }
    Ok(out)
}
