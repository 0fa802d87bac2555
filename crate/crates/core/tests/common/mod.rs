//! Reference implementations used as test oracles. They favor obviousness
//! over speed and share no code with the library beyond its public types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialforge::gsi::score_candidate;
use socialforge::{NodeId, Population, ProfileEmbedding, ProfileTable, SocialGraph};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed G(n, p) without self-loops.
pub fn random_graph(n: usize, p: f64, r: &mut ChaCha8Rng) -> SocialGraph {
    let mut g = SocialGraph::new(n);
    for u in 0..n {
        for v in 0..n {
            if u != v && r.random::<f64>() < p {
                g.add_follow_edge(NodeId::from(u), NodeId::from(v)).unwrap();
            }
        }
    }
    g
}

pub fn random_profiles(n: usize, d: usize, r: &mut ChaCha8Rng) -> ProfileTable {
    let embeddings = (0..n)
        .map(|_| {
            ProfileEmbedding::new((0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()).unwrap()
        })
        .collect();
    ProfileTable::new(embeddings, vec![None; n], vec![Population::Bot; n]).unwrap()
}

fn undirected_matrix(g: &SocialGraph) -> Vec<Vec<bool>> {
    let n = g.node_count();
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in g.follow_edges() {
        a[u.index()][v.index()] = true;
        a[v.index()][u.index()] = true;
    }
    a
}

/// Clustering by degree from explicit triple enumeration. Nodes are summed
/// in ascending id order.
pub fn clustering_oracle(g: &SocialGraph) -> BTreeMap<usize, (f64, usize)> {
    let a = undirected_matrix(g);
    let n = a.len();
    let mut buckets: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for v in 0..n {
        let k = (0..n).filter(|&u| a[v][u]).count();
        if k < 2 {
            continue;
        }
        let mut t = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                if a[v][i] && a[v][j] && a[i][j] {
                    t += 1;
                }
            }
        }
        let c = (2 * t) as f64 / (k * (k - 1)) as f64;
        let e = buckets.entry(k).or_insert((0.0, 0));
        e.0 += c;
        e.1 += 1;
    }
    buckets
        .into_iter()
        .map(|(k, (s, c))| (k, (s / c as f64, c)))
        .collect()
}

pub fn triangle_count_oracle(g: &SocialGraph) -> u64 {
    let a = undirected_matrix(g);
    let n = a.len();
    let mut t = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if a[i][j] && a[j][k] && a[i][k] {
                    t += 1;
                }
            }
        }
    }
    t
}

/// Largest `k` such that some non-empty induced subgraph has minimum degree
/// at least `k`, by enumerating every node subset.
pub fn degeneracy_oracle(g: &SocialGraph) -> usize {
    let a = undirected_matrix(g);
    let n = a.len();
    let mut best = 0;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let min_deg = members
            .iter()
            .map(|&v| members.iter().filter(|&&u| a[v][u]).count())
            .min()
            .unwrap();
        best = best.max(min_deg);
    }
    best
}

/// KL divergence in nats with Neumaier-compensated summation of
/// `p ln p - p ln q`.
pub fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |x: f64| {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    };
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            add(a * a.ln());
            add(-a * b.ln());
        }
    }
    sum + comp
}

/// Best `(score, nodes)` over every simple `source -> target` path with
/// `min_hops..=max_hops` hops whose intermediates come from `pool`. A path's
/// score is the sum over its intermediates of `score_candidate`, with the
/// candidate set at each step being the pool minus intermediates already
/// placed. Ties go to the lexicographically smallest node sequence.
pub fn best_path_oracle(
    g: &SocialGraph,
    profiles: &ProfileTable,
    source: NodeId,
    target: NodeId,
    pool: &[NodeId],
    min_hops: usize,
    max_hops: usize,
) -> Option<(f64, Vec<NodeId>)> {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        g: &SocialGraph,
        profiles: &ProfileTable,
        source: NodeId,
        target: NodeId,
        pool: &[NodeId],
        chosen: &mut Vec<NodeId>,
        score: f64,
        bounds: (usize, usize),
        best: &mut Option<(f64, Vec<NodeId>)>,
    ) {
        let hops = chosen.len() + 1;
        if hops >= bounds.0 {
            let mut nodes = vec![source];
            nodes.extend(chosen.iter().copied());
            nodes.push(target);
            let better = match best {
                None => true,
                Some((b, ids)) => score > *b || (score == *b && nodes < *ids),
            };
            if better {
                *best = Some((score, nodes));
            }
        }
        if hops == bounds.1 {
            return;
        }
        let candidates: Vec<NodeId> = pool
            .iter()
            .copied()
            .filter(|v| !chosen.contains(v))
            .collect();
        for &v in &candidates {
            let s = score_candidate(source, v, &candidates, g, profiles).unwrap();
            chosen.push(v);
            walk(
                g,
                profiles,
                source,
                target,
                pool,
                chosen,
                score + s,
                bounds,
                best,
            );
            chosen.pop();
        }
    }
    let mut best = None;
    walk(
        g,
        profiles,
        source,
        target,
        pool,
        &mut Vec::new(),
        0.0,
        (min_hops, max_hops),
        &mut best,
    );
    best
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
