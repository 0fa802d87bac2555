//! Directed follow graph with an append-only interaction log.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::ProfileTable;
use crate::rng::stream_rng;

/// Dense node index in `[0, node_count)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(u32::try_from(v).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Follow,
    Like,
    Retweet,
    Comment,
}

impl EdgeKind {
    pub const INTERACTIONS: [EdgeKind; 3] = [EdgeKind::Like, EdgeKind::Retweet, EdgeKind::Comment];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Follow => "follow",
            EdgeKind::Like => "like",
            EdgeKind::Retweet => "retweet",
            EdgeKind::Comment => "comment",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
    pub sequence_index: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityStats {
    pub reachable_ordered_pairs: u64,
    pub total_ordered_pairs: u64,
    pub fraction: f64,
    /// `false` when the counts come from a sample of sources.
    pub exact: bool,
}

/// How [`SocialGraph::reachability_with`] enumerates sources.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ReachabilityMode {
    /// Exact up to [`EXACT_REACHABILITY_LIMIT`] nodes, sampled above.
    Auto,
    Exact,
    Sampled {
        sources: usize,
        seed: u64,
    },
}

pub const EXACT_REACHABILITY_LIMIT: usize = 20_000;
pub const SAMPLED_REACHABILITY_SOURCES: usize = 256;

const UNREACHED: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
pub struct SocialGraph {
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    follow_set: HashSet<(NodeId, NodeId)>,
    follow_log: Vec<(NodeId, NodeId)>,
    interactions: Vec<Interaction>,
    profiles: Option<Arc<ProfileTable>>,
}

impl SocialGraph {
    pub fn new(node_count: usize) -> Self {
        SocialGraph {
            out_adj: vec![Vec::new(); node_count],
            in_adj: vec![Vec::new(); node_count],
            ..Default::default()
        }
    }

    /// Builds a graph from follow edges, failing on the first invalid edge.
    pub fn from_follows<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut g = SocialGraph::new(node_count);
        for (u, v) in edges {
            g.add_follow_edge(NodeId(u), NodeId(v))?;
        }
        Ok(g)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.out_adj.len()
    }

    #[inline]
    pub fn follow_count(&self) -> usize {
        self.follow_log.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(NodeId::from)
    }

    pub fn check_node(&self, id: NodeId) -> Result<()> {
        if id.index() < self.node_count() {
            Ok(())
        } else {
            Err(Error::InvalidNode {
                id,
                node_count: self.node_count(),
            })
        }
    }

    /// Inserts `u -> v`. Returns `false` if the edge was already present.
    pub fn add_follow_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if !self.follow_set.insert((u, v)) {
            return Ok(false);
        }
        self.out_adj[u.index()].push(v);
        self.in_adj[v.index()].push(u);
        self.follow_log.push((u, v));
        Ok(true)
    }

    #[inline]
    pub fn has_follow(&self, u: NodeId, v: NodeId) -> bool {
        self.follow_set.contains(&(u, v))
    }

    /// Out-neighbors in insertion order.
    #[inline]
    pub fn out_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.out_adj[v.index()]
    }

    /// In-neighbors in insertion order.
    #[inline]
    pub fn in_neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.in_adj[v.index()]
    }

    #[inline]
    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_adj[v.index()].len()
    }

    #[inline]
    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_adj[v.index()].len()
    }

    /// Follow edges in insertion order.
    pub fn follow_edges(&self) -> &[(NodeId, NodeId)] {
        &self.follow_log
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn profiles(&self) -> Option<&Arc<ProfileTable>> {
        self.profiles.as_ref()
    }

    pub fn set_profiles(&mut self, profiles: Arc<ProfileTable>) -> Result<()> {
        if profiles.len() != self.node_count() {
            return Err(Error::InvalidParameter(format!(
                "profile table has {} rows for {} nodes",
                profiles.len(),
                self.node_count()
            )));
        }
        self.profiles = Some(profiles);
        Ok(())
    }

    /// Appends an interaction annotation on an existing follow edge.
    pub fn attach_interaction(&mut self, u: NodeId, v: NodeId, kind: EdgeKind) -> Result<u64> {
        self.check_node(u)?;
        self.check_node(v)?;
        if kind == EdgeKind::Follow {
            return Err(Error::FollowAsInteraction);
        }
        if !self.has_follow(u, v) {
            return Err(Error::DanglingInteraction {
                source_node: u,
                target: v,
            });
        }
        let sequence_index = self.interactions.len() as u64;
        self.interactions.push(Interaction {
            source: u,
            target: v,
            kind,
            sequence_index,
        });
        Ok(sequence_index)
    }

    /// Full cross-scan of adjacency, edge set and interaction log.
    pub fn check_consistency(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Internal(msg));
        if self.in_adj.len() != self.out_adj.len() {
            return bad("adjacency length mismatch".into());
        }
        let mut seen = 0usize;
        for u in self.nodes() {
            for &v in self.out_neighbors(u) {
                seen += 1;
                if u == v {
                    return bad(format!("self-loop on {u}"));
                }
                if !self.in_neighbors(v).contains(&u) {
                    return bad(format!("{u}->{v} missing from in-list of {v}"));
                }
                if !self.follow_set.contains(&(u, v)) {
                    return bad(format!("{u}->{v} missing from edge set"));
                }
            }
            for &w in self.in_neighbors(u) {
                if !self.out_neighbors(w).contains(&u) {
                    return bad(format!("{w}->{u} missing from out-list of {w}"));
                }
            }
        }
        if seen != self.follow_set.len() || seen != self.follow_log.len() {
            return bad("duplicate or missing follow edges".into());
        }
        for (i, it) in self.interactions.iter().enumerate() {
            if it.sequence_index != i as u64 || !self.has_follow(it.source, it.target) {
                return bad(format!("interaction {i} is inconsistent"));
            }
        }
        Ok(())
    }

    /// Hop distances from `source` along follow edges. Unreached nodes are absent.
    pub fn bfs_distances(&self, source: NodeId) -> Result<BTreeMap<NodeId, u32>> {
        self.check_node(source)?;
        let mut dist = vec![UNREACHED; self.node_count()];
        let mut queue = Vec::new();
        self.bfs_fill(source, &mut dist, &mut queue);
        Ok(dist
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != UNREACHED)
            .map(|(i, &d)| (NodeId::from(i), d))
            .collect())
    }

    /// BFS into caller-owned buffers; `dist` must be `UNREACHED`-filled.
    /// Returns the visited nodes in BFS order (stored in `queue`).
    pub(crate) fn bfs_fill(&self, source: NodeId, dist: &mut [u32], queue: &mut Vec<u32>) {
        queue.clear();
        dist[source.index()] = 0;
        queue.push(source.0);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            let next = dist[v as usize] + 1;
            for &w in &self.out_adj[v as usize] {
                if dist[w.index()] == UNREACHED {
                    dist[w.index()] = next;
                    queue.push(w.0);
                }
            }
        }
    }

    /// Runs `f` on the BFS distance vector of every source in `sources`, in
    /// parallel, and sums the results.
    pub(crate) fn fold_bfs<T, F, R>(
        &self,
        sources: &[NodeId],
        identity: fn() -> T,
        f: F,
        reduce: R,
    ) -> T
    where
        T: Send,
        F: Fn(&mut T, NodeId, &[u32], &[u32]) + Sync,
        R: Fn(T, T) -> T + Sync + Send,
    {
        let n = self.node_count();
        sources
            .par_iter()
            .fold(
                || (identity(), vec![UNREACHED; n], Vec::with_capacity(n)),
                |(mut acc, mut dist, mut queue), &s| {
                    self.bfs_fill(s, &mut dist, &mut queue);
                    f(&mut acc, s, &dist, &queue);
                    for &v in queue.iter() {
                        dist[v as usize] = UNREACHED;
                    }
                    (acc, dist, queue)
                },
            )
            .map(|(acc, _, _)| acc)
            .reduce(identity, reduce)
    }

    /// Fraction of ordered pairs `(u, v)`, `u != v`, with a directed path `u ⇝ v`.
    pub fn reachability_fraction(&self) -> Result<ReachabilityStats> {
        self.reachability_with(ReachabilityMode::Auto)
    }

    pub fn reachability_with(&self, mode: ReachabilityMode) -> Result<ReachabilityStats> {
        let n = self.node_count();
        if n < 2 {
            return Err(Error::DegenerateGraph { node_count: n });
        }
        let mode = match mode {
            ReachabilityMode::Auto if n > EXACT_REACHABILITY_LIMIT => ReachabilityMode::Sampled {
                sources: SAMPLED_REACHABILITY_SOURCES,
                seed: 0,
            },
            ReachabilityMode::Auto => ReachabilityMode::Exact,
            m => m,
        };
        let (sources, exact): (Vec<NodeId>, bool) = match mode {
            ReachabilityMode::Sampled { sources, seed } if sources < n => {
                let mut rng = stream_rng(seed, "reachability/sources");
                let mut picked: Vec<NodeId> = sample(&mut rng, n, sources)
                    .into_iter()
                    .map(NodeId::from)
                    .collect();
                picked.sort_unstable();
                (picked, false)
            }
            _ => (self.nodes().collect(), true),
        };
        let reached = self.fold_bfs(
            &sources,
            || 0u64,
            |acc, _, _, visited| *acc += visited.len() as u64 - 1,
            |a, b| a + b,
        );
        let total = sources.len() as u64 * (n as u64 - 1);
        Ok(ReachabilityStats {
            reachable_ordered_pairs: reached,
            total_ordered_pairs: total,
            fraction: reached as f64 / total as f64,
            exact,
        })
    }

    /// Whether a directed path `u ⇝ v` exists.
    pub fn has_path(&self, u: NodeId, v: NodeId) -> Result<bool> {
        self.check_node(u)?;
        self.check_node(v)?;
        if u == v {
            return Err(Error::InvalidParameter(
                "has_path requires distinct nodes".into(),
            ));
        }
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![u];
        seen[u.index()] = true;
        while let Some(x) = stack.pop() {
            for &w in self.out_neighbors(x) {
                if w == v {
                    return Ok(true);
                }
                if !seen[w.index()] {
                    seen[w.index()] = true;
                    stack.push(w);
                }
            }
        }
        Ok(false)
    }
}
