//! Population network construction: community partitioning, homophilous
//! intra-community wiring, multi-hop follow completion, interaction
//! refinement and human/bot dataset assembly.

use std::sync::Arc;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::{generate_interactions, InteractionRecord, LevelTable, LevelThresholds};
use crate::graph::{EdgeKind, NodeId, SocialGraph};
use crate::gsi::{
    generate_group, generate_path, reward_gsi, select_best_of_n, serialize_chain, Chain, GsiReward,
    PathSearch,
};
use crate::profiles::ProfileTable;
use crate::rng::{stream_rng, StreamRng};

/// Softmax temperature for similarity-weighted intra-community wiring.
pub const INTRA_TEMPERATURE: f64 = 0.2;

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOLERANCE: f64 = 1e-6;
const PAIR_SAMPLE_ATTEMPTS: usize = 1_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub n_bots: usize,
    pub n_communities: usize,
    pub tau: f64,
    pub intra_mean_out_degree: f64,
    pub max_completion_iters: usize,
    pub interaction_count_per_edge: usize,
    /// Filled from the run-level seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            n_bots: 500,
            n_communities: 10,
            tau: 0.97,
            intra_mean_out_degree: 4.0,
            max_completion_iters: 50_000,
            interaction_count_per_edge: 2,
            seed: 42,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        validate_tau(self.tau)?;
        if self.n_communities == 0 || self.n_communities > self.n_bots {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= n_communities <= n_bots, got {} communities for {} bots",
                self.n_communities, self.n_bots
            )));
        }
        if self.n_bots < 2 {
            return Err(Error::InvalidParameter("need at least 2 bots".into()));
        }
        if self.max_completion_iters == 0 {
            return Err(Error::InvalidParameter(
                "max_completion_iters must be > 0".into(),
            ));
        }
        if !(self.intra_mean_out_degree >= 0.0 && self.intra_mean_out_degree.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "intra_mean_out_degree must be >= 0, got {}",
                self.intra_mean_out_degree
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "tau must be in (0, 1], got {tau}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub iterations_used: usize,
    pub edges_added: usize,
    pub initial_reachability: f64,
    pub final_reachability: f64,
    pub chains_generated: usize,
    /// Reachability before the loop and after every iteration.
    pub reachability_trace: Vec<f64>,
    /// `false` when the loop stopped at `max_iters` below `tau`.
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's k-means on the embeddings with farthest-point initialization.
///
/// The first center is a seeded uniform pick; each further center is the
/// node farthest from its nearest chosen center. Empty clusters take the
/// node farthest from its centroid among clusters with more than one member.
/// Stops after 100 iterations or when no centroid moves by `1e-6`.
pub fn partition_communities(profiles: &ProfileTable, n: usize, seed: u64) -> Result<Vec<u32>> {
    let points: Vec<&[f64]> = profiles.embeddings().iter().map(|e| e.as_slice()).collect();
    if points.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot partition an empty profile table".into(),
        ));
    }
    if n == 0 || n > points.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot form {n} communities from {} profiles",
            points.len()
        )));
    }
    let mut rng = stream_rng(seed, "partition");
    let first = rng.random_range(0..points.len());
    let mut chosen = vec![false; points.len()];
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, points[first])).collect();
    while centroids.len() < n {
        let mut pick = None::<(usize, f64)>;
        for (i, &d) in closest.iter().enumerate() {
            if !chosen[i] && pick.is_none_or(|(_, b)| d > b) {
                pick = Some((i, d));
            }
        }
        let (i, _) = pick.expect("fewer unchosen points than missing centers");
        chosen[i] = true;
        centroids.push(points[i].to_vec());
        for (j, p) in points.iter().enumerate() {
            closest[j] = closest[j].min(sq_dist(p, points[i]));
        }
    }

    let dim = points[0].len();
    let mut labels = vec![0usize; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        assign(&points, &centroids, &mut labels);
        let mut next = vec![vec![0.0; dim]; n];
        let mut sizes = vec![0usize; n];
        for (p, &l) in points.iter().zip(&labels) {
            sizes[l] += 1;
            next[l].iter_mut().zip(p.iter()).for_each(|(a, x)| *a += x);
        }
        for (c, size) in sizes.iter().enumerate() {
            next[c].iter_mut().for_each(|a| *a /= *size as f64);
        }
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    assign(&points, &centroids, &mut labels);
    Ok(labels.into_iter().map(|l| l as u32).collect())
}

/// Nearest-centroid assignment followed by empty-cluster repair.
fn assign(points: &[&[f64]], centroids: &[Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    let mut dist = vec![0.0; points.len()];
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, centroids);
        labels[i] = c;
        dist[i] = d;
    }
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut pick = None::<(usize, f64)>;
        for (i, &d) in dist.iter().enumerate() {
            if sizes[labels[i]] > 1 && pick.is_none_or(|(_, b)| d > b) {
                pick = Some((i, d));
            }
        }
        let (i, _) = pick.expect("k <= n guarantees a donor cluster");
        sizes[labels[i]] -= 1;
        labels[i] = c;
        sizes[c] = 1;
        dist[i] = 0.0;
    }
}

/// Wires each community internally. Every node draws
/// `round(mean_out_degree)` distinct same-community targets (capped by the
/// community size) with probability proportional to
/// `exp(cos(x_u, x_v) / 0.2)`. Returns the number of edges added.
pub fn build_intra_community(
    g: &mut SocialGraph,
    profiles: &ProfileTable,
    labels: &[u32],
    mean_out_degree: f64,
    seed: u64,
) -> Result<usize> {
    let n = g.node_count();
    if labels.len() != n || profiles.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} labels and {} profiles for {n} nodes",
            labels.len(),
            profiles.len()
        )));
    }
    if !(mean_out_degree >= 0.0 && mean_out_degree.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean_out_degree must be >= 0, got {mean_out_degree}"
        )));
    }
    let draws = mean_out_degree.round() as usize;
    let groups = members_by_label(labels);
    let mut rng = stream_rng(seed, "intra-community");
    let mut added = 0;
    for u in 0..n {
        let members = &groups[labels[u] as usize];
        let others: Vec<NodeId> = members
            .iter()
            .copied()
            .filter(|&v| v.index() != u)
            .collect();
        let take = draws.min(others.len());
        if take == 0 {
            continue;
        }
        let uid = NodeId::from(u);
        let mut weights = others
            .iter()
            .map(|&v| Ok((profiles.similarity(uid, v)? / INTRA_TEMPERATURE).exp()))
            .collect::<Result<Vec<f64>>>()?;
        for _ in 0..take {
            let k = weighted_pick(&weights, &mut rng);
            weights[k] = 0.0;
            if g.add_follow_edge(uid, others[k])? {
                added += 1;
            }
        }
    }
    Ok(added)
}

fn members_by_label(labels: &[u32]) -> Vec<Vec<NodeId>> {
    let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut groups = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l as usize].push(NodeId::from(i));
    }
    groups
}

/// Index drawn proportionally to `weights` (at least one must be positive).
fn weighted_pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if x < w {
                return i;
            }
            x -= w;
        }
    }
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("no positive weight")
}

/// Proposes a `source -> target` node path for the completion loop.
pub trait CompletionPolicy {
    fn name(&self) -> &'static str;

    /// `Ok(None)` when the policy cannot connect the pair.
    fn propose(
        &mut self,
        g: &SocialGraph,
        source: NodeId,
        target: NodeId,
        rng: &mut StreamRng,
    ) -> Result<Option<Vec<NodeId>>>;
}

/// Similarity- and influence-guided path proposals.
pub struct GsiPolicy<'a> {
    pub profiles: &'a ProfileTable,
    pub search: PathSearch,
    /// With `group_size >= 2` each proposal is the best of a sampled group.
    pub group_size: usize,
    pub temperature: f64,
}

impl<'a> GsiPolicy<'a> {
    pub fn new(profiles: &'a ProfileTable, search: PathSearch) -> Self {
        GsiPolicy {
            profiles,
            search,
            group_size: 0,
            temperature: 0.5,
        }
    }
}

impl CompletionPolicy for GsiPolicy<'_> {
    fn name(&self) -> &'static str {
        "graphmind"
    }

    fn propose(
        &mut self,
        g: &SocialGraph,
        source: NodeId,
        target: NodeId,
        rng: &mut StreamRng,
    ) -> Result<Option<Vec<NodeId>>> {
        if self.group_size >= 2 {
            let group = generate_group(
                g,
                self.profiles,
                source,
                target,
                &self.search,
                self.group_size,
                self.temperature,
                rng,
            )?;
            return Ok(group.map(|grp| grp.chains()[select_best_of_n(&grp)].nodes().to_vec()));
        }
        Ok(
            generate_path(g, self.profiles, source, target, &self.search)?
                .map(|p| p.chain.nodes().to_vec()),
        )
    }
}

/// One logged chain with rewards computed on the graph as it was when the
/// chain was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLogEntry {
    pub iteration: usize,
    pub source: NodeId,
    pub target: NodeId,
    pub nodes: Vec<NodeId>,
    pub rewards: Option<GsiReward>,
    pub text: String,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CompletionOptions {
    pub tau: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub log_chains: bool,
}

#[derive(Clone, Debug)]
pub struct Completion {
    pub report: BuildReport,
    pub chains: Vec<ChainLogEntry>,
}

/// Samples an ordered pair `(u, v)` with no path `u ⇝ v`, uniformly: up to
/// 1,000 rejection draws, then an exhaustive scan.
pub fn sample_no_path_pair<R: Rng + ?Sized>(
    g: &SocialGraph,
    rng: &mut R,
) -> Result<Option<(NodeId, NodeId)>> {
    let n = g.node_count();
    if n < 2 {
        return Ok(None);
    }
    for _ in 0..PAIR_SAMPLE_ATTEMPTS {
        let u = rng.random_range(0..n);
        let mut v = rng.random_range(0..n - 1);
        if v >= u {
            v += 1;
        }
        let (u, v) = (NodeId::from(u), NodeId::from(v));
        if !g.has_path(u, v)? {
            return Ok(Some((u, v)));
        }
    }
    let mut pairs = Vec::new();
    for u in g.nodes() {
        let reached = g.bfs_distances(u)?;
        for v in g.nodes() {
            if v != u && !reached.contains_key(&v) {
                pairs.push((u, v));
            }
        }
    }
    if pairs.is_empty() {
        return Ok(None);
    }
    Ok(Some(pairs[rng.random_range(0..pairs.len())]))
}

/// Multi-hop follow completion.
///
/// While reachability is below `tau` (and fewer than `max_iters` iterations
/// ran): sample an ordered no-path pair `(u, v)`, ask the policy for a
/// `u -> v` and a `v -> u` path on the current graph, then add every missing
/// edge of both paths.
pub fn complete_multi_hop<P: CompletionPolicy + ?Sized>(
    g: &mut SocialGraph,
    profiles: &ProfileTable,
    policy: &mut P,
    opts: &CompletionOptions,
) -> Result<Completion> {
    validate_tau(opts.tau)?;
    if opts.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be > 0".into()));
    }
    let mut rng = stream_rng(opts.seed, "completion");
    let initial = g.reachability_fraction()?.fraction;
    let mut reach = initial;
    let mut report = BuildReport {
        iterations_used: 0,
        edges_added: 0,
        initial_reachability: initial,
        final_reachability: initial,
        chains_generated: 0,
        reachability_trace: vec![initial],
        converged: initial >= opts.tau,
    };
    let mut chains = Vec::new();
    while reach < opts.tau && report.iterations_used < opts.max_iters {
        let Some((u, v)) = sample_no_path_pair(g, &mut rng)? else {
            return Err(Error::Internal(format!(
                "reachability {reach} is below tau {} but every ordered pair is connected",
                opts.tau
            )));
        };
        report.iterations_used += 1;
        let forward = policy.propose(g, u, v, &mut rng)?;
        let backward = policy.propose(g, v, u, &mut rng)?;
        let paths: Vec<Vec<NodeId>> = [forward, backward].into_iter().flatten().collect();
        for path in &paths {
            report.chains_generated += 1;
            if opts.log_chains {
                chains.push(log_entry(report.iterations_used, path, g, profiles)?);
            }
        }
        for path in &paths {
            for w in path.windows(2) {
                if g.add_follow_edge(w[0], w[1])? {
                    report.edges_added += 1;
                }
            }
        }
        let next = g.reachability_fraction()?.fraction;
        if next < reach {
            return Err(Error::Internal(format!(
                "reachability decreased from {reach} to {next}"
            )));
        }
        reach = next;
        report.reachability_trace.push(reach);
        debug!(
            "{} iteration {}: pair ({u}, {v}), reachability {reach:.4}",
            policy.name(),
            report.iterations_used
        );
    }
    report.final_reachability = reach;
    report.converged = reach >= opts.tau;
    info!(
        "{} completion: {} iterations, {} edges added, reachability {:.4} -> {:.4}",
        policy.name(),
        report.iterations_used,
        report.edges_added,
        initial,
        reach
    );
    Ok(Completion { report, chains })
}

fn log_entry(
    iteration: usize,
    path: &[NodeId],
    g: &SocialGraph,
    profiles: &ProfileTable,
) -> Result<ChainLogEntry> {
    let chain = Chain::new(path.to_vec())?;
    let rewards = if chain.len() >= 3 {
        Some(reward_gsi(&chain, g, profiles)?)
    } else {
        None
    };
    Ok(ChainLogEntry {
        iteration,
        source: chain.source(),
        target: chain.target(),
        nodes: path.to_vec(),
        rewards,
        text: serialize_chain(&chain, g, profiles)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FimSettings {
    /// Explicit cut-offs; sampled from the profile table when absent.
    pub thresholds: Option<LevelThresholds>,
    pub table: LevelTable,
    /// Pairs sampled to estimate default thresholds.
    pub threshold_samples: usize,
}

impl Default for FimSettings {
    fn default() -> Self {
        FimSettings {
            thresholds: None,
            table: LevelTable::default(),
            threshold_samples: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub thresholds: LevelThresholds,
    pub records: Vec<InteractionRecord>,
    /// Records attached to the graph; follow-kind records are not attached.
    pub attached: usize,
}

/// Infers a tie level for every follow edge and generates `count_per_edge`
/// interactions on it.
pub fn refine_interactions(
    g: &mut SocialGraph,
    profiles: &ProfileTable,
    settings: &FimSettings,
    count_per_edge: usize,
    seed: u64,
) -> Result<Refinement> {
    let thresholds = settings.thresholds.unwrap_or_else(|| {
        LevelThresholds::from_sample(profiles, settings.threshold_samples, seed)
    });
    let edges = g.follow_edges().to_vec();
    let per_edge: Vec<Vec<InteractionRecord>> = edges
        .par_iter()
        .map(|&(u, v)| {
            let level = thresholds.level_for(profiles.similarity(u, v)?);
            Ok(generate_interactions(
                u,
                v,
                level,
                count_per_edge,
                &settings.table,
                seed,
            ))
        })
        .collect::<Result<_>>()?;
    let records: Vec<InteractionRecord> = per_edge.into_iter().flatten().collect();
    let mut attached = 0;
    for r in &records {
        if r.kind != EdgeKind::Follow {
            g.attach_interaction(r.actor, r.target, r.kind)?;
            attached += 1;
        }
    }
    Ok(Refinement {
        thresholds,
        records,
        attached,
    })
}

/// Disjoint union of a bot graph and a human graph (bots first), both of
/// which must carry profiles, plus `bridge_edges_per_side` follow edges in
/// each direction. Bridge sources are visited in seeded random order, round
/// robin, each following its most similar not-yet-followed node on the other
/// side.
pub fn assemble_dataset(
    bots: &SocialGraph,
    humans: &SocialGraph,
    bridge_edges_per_side: usize,
    seed: u64,
) -> Result<SocialGraph> {
    let (Some(bot_profiles), Some(human_profiles)) = (bots.profiles(), humans.profiles()) else {
        return Err(Error::InvalidParameter(
            "both populations need profile tables".into(),
        ));
    };
    let nb = bots.node_count();
    let nh = humans.node_count();
    if nb == 0 || nh == 0 {
        return Err(Error::InvalidParameter(
            "both populations must be non-empty".into(),
        ));
    }
    if bridge_edges_per_side > nb * nh {
        return Err(Error::InvalidParameter(format!(
            "{bridge_edges_per_side} bridge edges per side exceeds the {} possible pairs",
            nb * nh
        )));
    }
    let offset = bot_profiles
        .communities()
        .iter()
        .flatten()
        .map(|&c| c + 1)
        .max()
        .unwrap_or(0);
    let merged = bot_profiles.concat(human_profiles, offset)?;
    let shift = |v: NodeId| NodeId::from(v.index() + nb);

    let mut g = SocialGraph::new(nb + nh);
    for &(u, v) in bots.follow_edges() {
        g.add_follow_edge(u, v)?;
    }
    for &(u, v) in humans.follow_edges() {
        g.add_follow_edge(shift(u), shift(v))?;
    }
    for it in bots.interactions() {
        g.attach_interaction(it.source, it.target, it.kind)?;
    }
    for it in humans.interactions() {
        g.attach_interaction(shift(it.source), shift(it.target), it.kind)?;
    }

    let bot_ids: Vec<NodeId> = (0..nb).map(NodeId::from).collect();
    let human_ids: Vec<NodeId> = (nb..nb + nh).map(NodeId::from).collect();
    let mut rng = stream_rng(seed, "bridges");
    add_bridges(
        &mut g,
        &merged,
        &bot_ids,
        &human_ids,
        bridge_edges_per_side,
        &mut rng,
    )?;
    add_bridges(
        &mut g,
        &merged,
        &human_ids,
        &bot_ids,
        bridge_edges_per_side,
        &mut rng,
    )?;
    g.set_profiles(Arc::new(merged))?;
    Ok(g)
}

fn add_bridges(
    g: &mut SocialGraph,
    profiles: &ProfileTable,
    sources: &[NodeId],
    targets: &[NodeId],
    count: usize,
    rng: &mut StreamRng,
) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let mut order = sources.to_vec();
    order.shuffle(rng);
    let mut ranked: Vec<Option<Vec<NodeId>>> = vec![None; order.len()];
    let mut cursor = vec![0usize; order.len()];
    let mut added = 0;
    while added < count {
        for (slot, &s) in order.iter().enumerate() {
            if added == count {
                break;
            }
            let list = match &mut ranked[slot] {
                Some(list) => list,
                none => {
                    let mut scored = targets
                        .iter()
                        .map(|&t| Ok((profiles.similarity(s, t)?, t)))
                        .collect::<Result<Vec<(f64, NodeId)>>>()?;
                    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    none.insert(scored.into_iter().map(|(_, t)| t).collect())
                }
            };
            while cursor[slot] < list.len() {
                let t = list[cursor[slot]];
                cursor[slot] += 1;
                if g.add_follow_edge(s, t)? {
                    added += 1;
                    break;
                }
            }
        }
    }
    Ok(())
}
