//! Structural metrics: neighborhood function, hop distances, clustering by
//! degree, degeneracy and degree distributions.
//!
//! Path-based metrics follow edge direction and count ordered pairs.
//! Clustering and degeneracy use the undirected projection (`{u, v}` present
//! iff `u -> v` or `v -> u`). Every metric is a pure function of the graph.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};

/// Number of ordered pairs at each directed distance `d` (index `d`, `d >= 1`;
/// index 0 is always zero). Length is `max(n, 1)`.
pub fn distance_histogram(g: &SocialGraph) -> Vec<u64> {
    let n = g.node_count();
    let sources: Vec<NodeId> = g.nodes().collect();
    let len = n.max(1);
    g.fold_bfs(
        &sources,
        Vec::new,
        |acc: &mut Vec<u64>, _, dist, visited| {
            if acc.is_empty() {
                acc.resize(len, 0);
            }
            for &v in &visited[1..] {
                acc[dist[v as usize] as usize] += 1;
            }
        },
        |a, b| match (a.is_empty(), b.is_empty()) {
            (true, _) => b,
            (_, true) => a,
            _ => a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        },
    )
    .into_iter()
    .chain(std::iter::repeat(0))
    .take(len)
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodFunction {
    /// `p[h - 1]` is the fraction of ordered pairs within distance `h`.
    pub p: Vec<f64>,
}

impl NeighborhoodFunction {
    pub fn max_h(&self) -> usize {
        self.p.len()
    }

    /// Value at hop `h`; saturates beyond `max_h`.
    pub fn at(&self, h: usize) -> f64 {
        if h == 0 || self.p.is_empty() {
            0.0
        } else {
            self.p[h.min(self.p.len()) - 1]
        }
    }
}

fn neighborhood_from_histogram(hist: &[u64], n: usize, max_h: usize) -> NeighborhoodFunction {
    let total = (n as u64 * (n as u64 - 1)) as f64;
    let mut cum = 0u64;
    let p = (1..=max_h)
        .map(|h| {
            cum += hist.get(h).copied().unwrap_or(0);
            cum as f64 / total
        })
        .collect();
    NeighborhoodFunction { p }
}

pub fn neighborhood_function(g: &SocialGraph, max_h: usize) -> Result<NeighborhoodFunction> {
    if max_h < 1 {
        return Err(Error::InvalidParameter("max_h must be >= 1".into()));
    }
    let n = g.node_count();
    if n < 2 {
        return Err(Error::DegenerateGraph { node_count: n });
    }
    Ok(neighborhood_from_histogram(
        &distance_histogram(g),
        n,
        max_h,
    ))
}

fn average_from_histogram(hist: &[u64]) -> Option<f64> {
    let pairs: u64 = hist.iter().sum();
    if pairs == 0 {
        return None;
    }
    let total: u64 = hist.iter().enumerate().map(|(d, &c)| d as u64 * c).sum();
    Some(total as f64 / pairs as f64)
}

/// Mean shortest-path length over reachable ordered pairs.
pub fn average_hop_distance(g: &SocialGraph) -> Result<f64> {
    average_from_histogram(&distance_histogram(g))
        .ok_or_else(|| Error::InvalidParameter("graph has no reachable ordered pairs".into()))
}

/// Simple undirected graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<Vec<u32>>,
}

impl UndirectedGraph {
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&(v as u32)).is_ok()
    }
}

pub fn undirected_projection(g: &SocialGraph) -> UndirectedGraph {
    let mut adj: Vec<Vec<u32>> = g
        .nodes()
        .map(|v| {
            g.out_neighbors(v)
                .iter()
                .chain(g.in_neighbors(v))
                .map(|w| w.0)
                .collect()
        })
        .collect();
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    UndirectedGraph { adj }
}

/// Triangles through each node of the projection.
pub fn triangles_per_node(u: &UndirectedGraph) -> Vec<u64> {
    let n = u.node_count();
    (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; n],
            |mut acc, a| {
                let na = u.neighbors(a);
                for &b in na.iter().filter(|&&b| b as usize > a) {
                    let nb = u.neighbors(b as usize);
                    // common neighbors c > b, by sorted merge
                    let (mut i, mut j) = (0, 0);
                    while i < na.len() && j < nb.len() {
                        match na[i].cmp(&nb[j]) {
                            std::cmp::Ordering::Less => i += 1,
                            std::cmp::Ordering::Greater => j += 1,
                            std::cmp::Ordering::Equal => {
                                let c = na[i];
                                if c > b {
                                    acc[a] += 1;
                                    acc[b as usize] += 1;
                                    acc[c as usize] += 1;
                                }
                                i += 1;
                                j += 1;
                            }
                        }
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; n],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        )
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeBucket {
    pub mean: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusteringByDegree {
    pub buckets: BTreeMap<usize, DegreeBucket>,
}

impl ClusteringByDegree {
    /// Node-weighted mean coefficient over degrees `2..limit`.
    pub fn mean_below(&self, limit: usize) -> Option<f64> {
        let (sum, count) = self
            .buckets
            .range(..limit)
            .fold((0.0, 0usize), |(s, c), (_, b)| {
                (s + b.mean * b.count as f64, c + b.count)
            });
        (count > 0).then(|| sum / count as f64)
    }
}

/// Local clustering `2 T_v / (k (k - 1))` of every node with projected degree
/// `k >= 2`; `None` below.
pub fn local_clustering(g: &SocialGraph) -> Vec<Option<f64>> {
    let u = undirected_projection(g);
    let tri = triangles_per_node(&u);
    (0..u.node_count())
        .map(|v| {
            let k = u.degree(v) as u64;
            (k >= 2).then(|| (2 * tri[v]) as f64 / (k * (k - 1)) as f64)
        })
        .collect()
}

pub fn clustering_by_degree(g: &SocialGraph) -> ClusteringByDegree {
    let u = undirected_projection(g);
    let local = local_clustering(g);
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (v, c) in local.iter().enumerate() {
        if let Some(c) = c {
            let e = sums.entry(u.degree(v)).or_insert((0.0, 0));
            e.0 += c;
            e.1 += 1;
        }
    }
    ClusteringByDegree {
        buckets: sums
            .into_iter()
            .map(|(k, (s, c))| {
                (
                    k,
                    DegreeBucket {
                        mean: s / c as f64,
                        count: c,
                    },
                )
            })
            .collect(),
    }
}

/// Core number of each node in the undirected projection (bucket peeling).
pub fn core_numbers(g: &SocialGraph) -> Vec<usize> {
    let u = undirected_projection(g);
    let n = u.node_count();
    let mut deg: Vec<usize> = (0..n).map(|v| u.degree(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    // bin[d] = first position of degree d in `order`
    let mut bin = vec![0usize; max_deg + 2];
    for &d in &deg {
        bin[d + 1] += 1;
    }
    for d in 1..bin.len() {
        bin[d] += bin[d - 1];
    }
    let mut pos = vec![0usize; n];
    let mut order = vec![0usize; n];
    let mut next = bin.clone();
    for v in 0..n {
        pos[v] = next[deg[v]];
        order[pos[v]] = v;
        next[deg[v]] += 1;
    }
    for i in 0..n {
        let v = order[i];
        for &w in u.neighbors(v) {
            let w = w as usize;
            if deg[w] > deg[v] {
                let dw = deg[w];
                let pw = pos[w];
                let first = bin[dw];
                let x = order[first];
                if x != w {
                    order.swap(first, pw);
                    pos[x] = pw;
                    pos[w] = first;
                }
                bin[dw] += 1;
                deg[w] -= 1;
            }
        }
    }
    deg
}

/// Largest `k` with a non-empty k-core.
pub fn degeneracy(g: &SocialGraph) -> usize {
    core_numbers(g).into_iter().max().unwrap_or(0)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

fn degrees(g: &SocialGraph, dir: Direction) -> Vec<usize> {
    g.nodes()
        .map(|v| match dir {
            Direction::In => g.in_degree(v),
            Direction::Out => g.out_degree(v),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    /// Node count per exact degree.
    pub counts: BTreeMap<usize, usize>,
    /// `(d, fraction of nodes with degree >= d)` for `d = 0` and every
    /// observed degree.
    pub ccdf: Vec<(usize, f64)>,
}

pub fn degree_histogram(g: &SocialGraph, dir: Direction) -> DegreeHistogram {
    let degs = degrees(g, dir);
    let mut counts = BTreeMap::new();
    for &d in &degs {
        *counts.entry(d).or_insert(0usize) += 1;
    }
    let n = degs.len();
    let mut ccdf = Vec::new();
    if n > 0 {
        let mut remaining = n;
        if !counts.contains_key(&0) {
            ccdf.push((0, 1.0));
        }
        for (&d, &c) in &counts {
            ccdf.push((d, remaining as f64 / n as f64));
            remaining -= c;
        }
    }
    DegreeHistogram { counts, ccdf }
}

/// Counts grouped into power-of-two bins `[2^k, 2^(k+1))`; degree 0 gets its
/// own bin keyed 0.
pub fn log_binned(hist: &DegreeHistogram) -> BTreeMap<usize, usize> {
    let mut bins = BTreeMap::new();
    for (&d, &c) in &hist.counts {
        let key = if d == 0 { 0 } else { 1usize << d.ilog2() };
        *bins.entry(key).or_insert(0) += c;
    }
    bins
}

/// `max degree / max(1, median degree)`.
pub fn tail_ratio(g: &SocialGraph, dir: Direction) -> Result<f64> {
    let mut degs = degrees(g, dir);
    if degs.iter().all(|&d| d == 0) {
        return Err(Error::InvalidParameter("every degree is zero".into()));
    }
    degs.sort_unstable();
    let n = degs.len();
    let median = if n % 2 == 1 {
        degs[n / 2] as f64
    } else {
        (degs[n / 2 - 1] + degs[n / 2]) as f64 / 2.0
    };
    Ok(*degs.last().unwrap() as f64 / median.max(1.0))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct MetricsOptions {
    /// Also report power-of-two binned degree counts.
    pub log_bins: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub node_count: usize,
    pub follow_count: usize,
    pub reachability: Option<f64>,
    /// Evaluated up to `max(6, longest shortest path)`; `None` below 2 nodes.
    pub neighborhood: Option<NeighborhoodFunction>,
    pub avg_hop: Option<f64>,
    pub clustering: ClusteringByDegree,
    pub degeneracy: usize,
    pub in_degree: DegreeHistogram,
    pub out_degree: DegreeHistogram,
    pub tail_ratio_in: Option<f64>,
    pub tail_ratio_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_degree_log_bins: Option<BTreeMap<usize, usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_degree_log_bins: Option<BTreeMap<usize, usize>>,
}

pub fn metrics_report(g: &SocialGraph, opts: MetricsOptions) -> MetricsReport {
    let n = g.node_count();
    let (reachability, neighborhood, avg_hop) = if n >= 2 {
        let hist = distance_histogram(g);
        let longest = hist.iter().rposition(|&c| c > 0).unwrap_or(0);
        let nf = neighborhood_from_histogram(&hist, n, longest.max(6));
        let reach = nf.at(nf.max_h());
        (Some(reach), Some(nf), average_from_histogram(&hist))
    } else {
        (None, None, None)
    };
    let in_degree = degree_histogram(g, Direction::In);
    let out_degree = degree_histogram(g, Direction::Out);
    MetricsReport {
        node_count: n,
        follow_count: g.follow_count(),
        reachability,
        neighborhood,
        avg_hop,
        clustering: clustering_by_degree(g),
        degeneracy: degeneracy(g),
        in_degree_log_bins: opts.log_bins.then(|| log_binned(&in_degree)),
        out_degree_log_bins: opts.log_bins.then(|| log_binned(&out_degree)),
        in_degree,
        out_degree,
        tail_ratio_in: tail_ratio(g, Direction::In).ok(),
        tail_ratio_out: tail_ratio(g, Direction::Out).ok(),
    }
}

impl MetricsReport {
    /// Tidy `metric,key,value` CSV with a header row. Scalar metrics leave
    /// `key` empty and missing values are written as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,key,value\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = |m: &str, k: String, v: String| {
            writeln!(out, "{m},{k},{v}").unwrap();
        };
        row("node_count", String::new(), self.node_count.to_string());
        row("follow_count", String::new(), self.follow_count.to_string());
        row("reachability", String::new(), opt(self.reachability));
        if let Some(nf) = &self.neighborhood {
            for (i, p) in nf.p.iter().enumerate() {
                row("neighborhood", (i + 1).to_string(), p.to_string());
            }
        }
        row("avg_hop", String::new(), opt(self.avg_hop));
        for (k, b) in &self.clustering.buckets {
            row("clustering_mean", k.to_string(), b.mean.to_string());
            row("clustering_count", k.to_string(), b.count.to_string());
        }
        row("degeneracy", String::new(), self.degeneracy.to_string());
        for (name, h) in [
            ("in_degree", &self.in_degree),
            ("out_degree", &self.out_degree),
        ] {
            for (d, c) in &h.counts {
                row(&format!("{name}_count"), d.to_string(), c.to_string());
            }
            for (d, f) in &h.ccdf {
                row(&format!("{name}_ccdf"), d.to_string(), f.to_string());
            }
        }
        for (name, bins) in [
            ("in_degree_log_bin", &self.in_degree_log_bins),
            ("out_degree_log_bin", &self.out_degree_log_bins),
        ] {
            for (d, c) in bins.iter().flatten() {
                row(name, d.to_string(), c.to_string());
            }
        }
        row("tail_ratio_in", String::new(), opt(self.tail_ratio_in));
        row("tail_ratio_out", String::new(), opt(self.tail_ratio_out));
        out
    }
}
