//! On-disk formats: JSON-lines helpers, optional gzip, and the graph
//! directory layout.
//!
//! A graph directory holds
//!
//! * `manifest.json` with counts, seed, config hash and tool version,
//! * `nodes.jsonl` with one profile record per node (absent for graphs
//!   without profiles),
//! * `edges.jsonl` with `{source, target, kind}` rows: follow edges in
//!   insertion order, then interactions in sequence order.
//!
//! With gzip enabled the JSON-lines files carry a `.gz` suffix.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{EdgeKind, NodeId, SocialGraph};
use crate::profiles::{Population, ProfileTable};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const MANIFEST_FILE: &str = "manifest.json";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const EDGES_FILE: &str = "edges.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const CHAIN_LOG_FILE: &str = "chain_log.jsonl";

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Buffered reader, transparently gunzipping `*.gz` paths.
pub fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Buffered writer that gzips when the path ends in `.gz`. Call
/// [`MaybeGzWriter::finish`] to flush; dropping it may lose buffered data.
pub enum MaybeGzWriter {
    Plain(BufWriter<File>),
    Gz(GzEncoder<BufWriter<File>>),
}

impl MaybeGzWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        Ok(if is_gz(path) {
            MaybeGzWriter::Gz(GzEncoder::new(file, Compression::default()))
        } else {
            MaybeGzWriter::Plain(file)
        })
    }

    pub fn finish(self) -> Result<()> {
        match self {
            MaybeGzWriter::Plain(mut w) => w.flush()?,
            MaybeGzWriter::Gz(w) => w.finish()?.flush()?,
        }
        Ok(())
    }
}

impl Write for MaybeGzWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        match self {
            MaybeGzWriter::Plain(w) => w.write(buf),
            MaybeGzWriter::Gz(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> std::io::Result<()> {
        match self {
            MaybeGzWriter::Plain(w) => w.flush(),
            MaybeGzWriter::Gz(w) => w.flush(),
        }
    }
}

pub fn write_jsonl<'a, T, I>(path: &Path, items: I) -> Result<()>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = MaybeGzWriter::create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.finish()
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = open_maybe_gz(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// SHA-256 hex digest of the canonical JSON form (object keys sorted, no
/// whitespace).
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let canonical = serde_json::to_value(value)?;
    let bytes = serde_json::to_vec(&canonical)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationCounts {
    pub nodes: usize,
    pub communities: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub node_count: usize,
    /// Follow edges plus interactions, i.e. rows in the edge file.
    pub edge_count: usize,
    pub follow_count: usize,
    pub interaction_count: usize,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub tool_version: String,
    pub strategy: Option<String>,
    /// Set when completion stopped before reaching its threshold.
    pub partial: bool,
    pub has_profiles: bool,
    pub gzip: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bots: Option<PopulationCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub humans: Option<PopulationCounts>,
}

impl Manifest {
    /// Counts derived from `g`; provenance fields are left empty.
    pub fn for_graph(g: &SocialGraph, gzip: bool) -> Self {
        let (bots, humans) = match g.profiles() {
            Some(p) => (
                population_counts(p, Population::Bot),
                population_counts(p, Population::Human),
            ),
            None => (None, None),
        };
        Manifest {
            schema_version: SCHEMA_VERSION,
            node_count: g.node_count(),
            edge_count: g.follow_count() + g.interactions().len(),
            follow_count: g.follow_count(),
            interaction_count: g.interactions().len(),
            seed: None,
            config_hash: None,
            tool_version: TOOL_VERSION.to_string(),
            strategy: None,
            partial: false,
            has_profiles: g.profiles().is_some(),
            gzip,
            bots,
            humans,
        }
    }
}

fn population_counts(p: &ProfileTable, which: Population) -> Option<PopulationCounts> {
    let ids: Vec<usize> = (0..p.len())
        .filter(|&i| p.populations()[i] == which)
        .collect();
    if ids.is_empty() {
        return None;
    }
    let mut communities: Vec<u32> = ids.iter().filter_map(|&i| p.communities()[i]).collect();
    communities.sort_unstable();
    communities.dedup();
    Some(PopulationCounts {
        nodes: ids.len(),
        communities: communities.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EdgeKind,
}

fn data_path(dir: &Path, name: &str, gzip: bool) -> PathBuf {
    if gzip {
        dir.join(format!("{name}.gz"))
    } else {
        dir.join(name)
    }
}

/// Writes the graph files and `manifest` into `dir`, creating it if needed.
/// Counts in the manifest are overwritten from `g`.
pub fn save_graph(g: &SocialGraph, dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir)?;
    let counts = Manifest::for_graph(g, manifest.gzip);
    let manifest = Manifest {
        node_count: counts.node_count,
        edge_count: counts.edge_count,
        follow_count: counts.follow_count,
        interaction_count: counts.interaction_count,
        has_profiles: counts.has_profiles,
        bots: counts.bots,
        humans: counts.humans,
        ..manifest.clone()
    };
    if let Some(p) = g.profiles() {
        crate::profiles::save_profiles(p, &data_path(dir, NODES_FILE, manifest.gzip))?;
    }
    let edges: Vec<EdgeRecord> = g
        .follow_edges()
        .iter()
        .map(|&(source, target)| EdgeRecord {
            source,
            target,
            kind: EdgeKind::Follow,
        })
        .chain(g.interactions().iter().map(|it| EdgeRecord {
            source: it.source,
            target: it.target,
            kind: it.kind,
        }))
        .collect();
    write_jsonl(&data_path(dir, EDGES_FILE, manifest.gzip), &edges)?;
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaMismatch(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            dir.display(),
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Loads a graph directory and checks it against its manifest.
pub fn load_graph(dir: &Path) -> Result<(SocialGraph, Manifest)> {
    let manifest = load_manifest(dir)?;
    let mut g = SocialGraph::new(manifest.node_count);
    let edges_path = data_path(dir, EDGES_FILE, manifest.gzip);
    let edges: Vec<EdgeRecord> = read_jsonl(&edges_path)?;
    let malformed = |line: usize, message: String| Error::Malformed {
        path: edges_path.clone(),
        line,
        message,
    };
    let mut seen_interaction = false;
    for (i, e) in edges.iter().enumerate() {
        let result = if e.kind == EdgeKind::Follow {
            if seen_interaction {
                return Err(malformed(
                    i + 1,
                    "follow edge after interaction rows".into(),
                ));
            }
            g.add_follow_edge(e.source, e.target).and_then(|added| {
                if added {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("duplicate follow edge".into()))
                }
            })
        } else {
            seen_interaction = true;
            g.attach_interaction(e.source, e.target, e.kind).map(|_| ())
        };
        result.map_err(|err| malformed(i + 1, err.to_string()))?;
    }
    if manifest.has_profiles {
        let p = crate::profiles::load_profiles(&data_path(dir, NODES_FILE, manifest.gzip))?;
        g.set_profiles(Arc::new(p))?;
    }
    let actual = Manifest::for_graph(&g, manifest.gzip);
    if (
        actual.node_count,
        actual.edge_count,
        actual.follow_count,
        actual.interaction_count,
    ) != (
        manifest.node_count,
        manifest.edge_count,
        manifest.follow_count,
        manifest.interaction_count,
    ) {
        return Err(Error::Malformed {
            path: dir.join(MANIFEST_FILE),
            line: 0,
            message: format!(
                "manifest counts {}/{}/{} do not match files ({} nodes, {} follows, {} interactions)",
                manifest.node_count,
                manifest.follow_count,
                manifest.interaction_count,
                actual.node_count,
                actual.follow_count,
                actual.interaction_count
            ),
        });
    }
    Ok((g, manifest))
}
