//! End-to-end runs behind the command-line tool: synthesize profiles, build
//! a graph with one strategy, measure it, compare runs and export chains.
//!
//! Every stage takes its own seed, `stream_seed(run_seed, label)`, with
//! labels `profiles`, `partition`, `intra`, `completion`, `fim`, `bridges`,
//! `generator` and, for the human population, `humans` as the base seed of
//! a nested run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use crate::baselines::{chung_lu, kronecker, power_law_weights, RandomMhopPolicy, WeightSequence};
use crate::builder::{
    assemble_dataset, build_intra_community, complete_multi_hop, partition_communities,
    refine_interactions, BuildConfig, BuildReport, ChainLogEntry, CompletionOptions,
    CompletionPolicy, GsiPolicy,
};
use crate::config::{RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::fim::{InteractionRecord, LevelThresholds};
use crate::graph::{NodeId, SocialGraph};
use crate::gsi::GsiReward;
use crate::io::{
    config_hash, load_graph, load_manifest, read_jsonl, save_graph, write_json, write_jsonl,
    Manifest, CHAIN_LOG_FILE, INTERACTIONS_FILE, REPORT_FILE,
};
use crate::metrics::{metrics_report, MetricsOptions, MetricsReport};
use crate::profiles::{load_profiles, synth_profiles, Population, ProfileTable};
use crate::rng::stream_seed;

/// Synthetic bot profiles for the configured strategy, or the configured
/// profile file.
pub fn run_synth(config: &RunConfig, n: usize, n_communities: usize) -> Result<ProfileTable> {
    config.validate()?;
    synth_profiles(
        n,
        n_communities,
        config.profiles.dim,
        config.profiles.spread,
        stream_seed(config.seed, "profiles"),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub seed: u64,
    pub node_count: usize,
    pub follow_count: usize,
    pub interaction_count: usize,
    /// Completion of the bot population.
    pub completion: Option<BuildReport>,
    pub human_completion: Option<BuildReport>,
    pub thresholds: Option<LevelThresholds>,
    /// Generated records, including follow-kind ones that are not attached.
    pub interaction_records: usize,
    pub partial: bool,
}

pub struct BuildOutput {
    pub graph: SocialGraph,
    pub manifest: Manifest,
    pub report: RunReport,
    /// Present when chain logging is enabled for a completion strategy.
    pub chains: Option<Vec<ChainLogEntry>>,
    pub interactions: Vec<InteractionRecord>,
}

struct BuiltPopulation {
    graph: SocialGraph,
    report: BuildReport,
    chains: Vec<ChainLogEntry>,
}

/// Partition, intra-community wiring and completion for one population.
fn build_population(
    mut profiles: ProfileTable,
    build: &BuildConfig,
    strategy: &Strategy,
    seed: u64,
    log_chains: bool,
) -> Result<BuiltPopulation> {
    let n = profiles.len();
    let labels = partition_communities(
        &profiles,
        build.n_communities,
        stream_seed(seed, "partition"),
    )?;
    profiles.set_communities(&labels)?;
    let mut g = SocialGraph::new(n);
    let intra = build_intra_community(
        &mut g,
        &profiles,
        &labels,
        build.intra_mean_out_degree,
        stream_seed(seed, "intra"),
    )?;
    info!("intra-community wiring: {intra} edges over {n} nodes");
    let opts = CompletionOptions {
        tau: build.tau,
        max_iters: build.max_completion_iters,
        seed: stream_seed(seed, "completion"),
        log_chains,
    };
    let mut policy: Box<dyn CompletionPolicy + '_> = match strategy {
        Strategy::Graphmind(p) => Box::new(GsiPolicy {
            group_size: p.group_size,
            temperature: p.temperature,
            ..GsiPolicy::new(&profiles, p.search)
        }),
        Strategy::RandomMhop(p) => {
            if p.m - 2 > n.saturating_sub(2) {
                return Err(Error::InsufficientNodes(format!(
                    "m = {} needs {} intermediates, graph has {n} nodes",
                    p.m,
                    p.m - 2
                )));
            }
            Box::new(RandomMhopPolicy::new(p.m)?)
        }
        _ => {
            return Err(Error::Internal(
                "generator strategy has no completion stage".into(),
            ))
        }
    };
    let completion = complete_multi_hop(&mut g, &profiles, policy.as_mut(), &opts)?;
    drop(policy);
    g.set_profiles(Arc::new(profiles))?;
    Ok(BuiltPopulation {
        graph: g,
        report: completion.report,
        chains: completion.chains,
    })
}

fn bot_profiles(config: &RunConfig, build: &BuildConfig) -> Result<ProfileTable> {
    match &config.profiles.path {
        Some(path) => {
            let p = load_profiles(path)?;
            if p.len() != build.n_bots {
                return Err(Error::InvalidParameter(format!(
                    "{} holds {} profiles but n_bots = {}",
                    path.display(),
                    p.len(),
                    build.n_bots
                )));
            }
            Ok(p)
        }
        None => synth_profiles(
            build.n_bots,
            build.n_communities,
            config.profiles.dim,
            config.profiles.spread,
            stream_seed(config.seed, "profiles"),
        ),
    }
}

/// Runs the configured strategy. The result may be partial (completion hit
/// its iteration bound); callers decide how to report that.
pub fn run_build(config: &RunConfig) -> Result<BuildOutput> {
    let config = config.clone().resolve();
    config.validate()?;
    let seed = config.seed;
    let hash = config_hash(&config)?;
    let strategy = &config.strategy;

    let mut report = RunReport {
        strategy: strategy.name().to_string(),
        seed,
        node_count: 0,
        follow_count: 0,
        interaction_count: 0,
        completion: None,
        human_completion: None,
        thresholds: None,
        interaction_records: 0,
        partial: false,
    };
    let mut chains = None;
    let mut interactions = Vec::new();

    let graph = match strategy {
        Strategy::ChungLu(p) => {
            let weights = match &p.weights {
                Some(w) => WeightSequence::new(w.clone())?,
                None => power_law_weights(p.n, p.exponent, p.w_min, stream_seed(seed, "weights"))?,
            };
            chung_lu(&weights, stream_seed(seed, "generator"))?
        }
        Strategy::Kronecker(p) => kronecker(&p.initiator, p.k, stream_seed(seed, "generator"))?,
        Strategy::Graphmind(_) | Strategy::RandomMhop(_) => {
            let build = strategy.build().expect("completion strategy");
            let bots = build_population(
                bot_profiles(&config, build)?,
                build,
                strategy,
                seed,
                config.log_chains,
            )?;
            report.partial = !bots.report.converged;
            report.completion = Some(bots.report);
            if config.log_chains {
                chains = Some(bots.chains);
            }
            let mut g = match &config.humans {
                None => bots.graph,
                Some(h) => {
                    let human_seed = stream_seed(seed, "humans");
                    let human_build = BuildConfig {
                        n_bots: h.n_humans,
                        n_communities: h.n_communities.unwrap_or(build.n_communities),
                        seed: human_seed,
                        ..build.clone()
                    };
                    let dim = bots
                        .graph
                        .profiles()
                        .map_or(config.profiles.dim, |p| p.dim());
                    let mut hp = synth_profiles(
                        h.n_humans,
                        human_build.n_communities,
                        dim,
                        config.profiles.spread,
                        stream_seed(human_seed, "profiles"),
                    )?;
                    hp.set_population(Population::Human);
                    let humans = build_population(hp, &human_build, strategy, human_seed, false)?;
                    report.partial |= !humans.report.converged;
                    report.human_completion = Some(humans.report);
                    assemble_dataset(
                        &bots.graph,
                        &humans.graph,
                        h.bridge_edges_per_side,
                        stream_seed(seed, "bridges"),
                    )?
                }
            };
            let profiles = g
                .profiles()
                .cloned()
                .expect("population graphs carry profiles");
            let refinement = refine_interactions(
                &mut g,
                &profiles,
                &config.fim,
                build.interaction_count_per_edge,
                stream_seed(seed, "fim"),
            )?;
            report.thresholds = Some(refinement.thresholds);
            report.interaction_records = refinement.records.len();
            interactions = refinement.records;
            g
        }
    };

    report.node_count = graph.node_count();
    report.follow_count = graph.follow_count();
    report.interaction_count = graph.interactions().len();
    let manifest = Manifest {
        seed: Some(seed),
        config_hash: Some(hash),
        strategy: Some(strategy.name().to_string()),
        partial: report.partial,
        ..Manifest::for_graph(&graph, false)
    };
    Ok(BuildOutput {
        graph,
        manifest,
        report,
        chains,
        interactions,
    })
}

/// Writes a build into `dir`: graph files, `report.json`,
/// `interactions.jsonl` and, when logged, `chain_log.jsonl`.
pub fn write_build(out: &BuildOutput, dir: &Path, gzip: bool) -> Result<()> {
    let manifest = Manifest {
        gzip,
        ..out.manifest.clone()
    };
    save_graph(&out.graph, dir, &manifest)?;
    write_json(&dir.join(REPORT_FILE), &out.report)?;
    let suffix = if gzip { ".gz" } else { "" };
    write_jsonl(
        &dir.join(format!("{INTERACTIONS_FILE}{suffix}")),
        &out.interactions,
    )?;
    let chain_log = dir.join(CHAIN_LOG_FILE);
    match &out.chains {
        Some(chains) => write_jsonl(&chain_log, chains)?,
        None if chain_log.exists() => fs::remove_file(chain_log)?,
        None => {}
    }
    Ok(())
}

pub fn run_metrics(graph_dir: &Path, opts: MetricsOptions) -> Result<MetricsReport> {
    let (g, _) = load_graph(graph_dir)?;
    Ok(metrics_report(&g, opts))
}

/// Writes `metrics.json` and `metrics.csv` into `out_dir`.
pub fn write_metrics(report: &MetricsReport, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("metrics.json"), report)?;
    fs::write(out_dir.join("metrics.csv"), report.to_csv())?;
    Ok(())
}

/// Degree bound for the clustering summary in comparisons.
pub const COMPARE_CLUSTERING_DEGREE: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub graph: String,
    pub strategy: Option<String>,
    pub avg_hop: Option<f64>,
    pub p6: Option<f64>,
    pub degeneracy: usize,
    pub tail_ratio_in: Option<f64>,
    /// Node-weighted mean clustering over degrees below 20.
    pub clustering_lt20: Option<f64>,
}

pub fn compare_row(graph_dir: &Path) -> Result<CompareRow> {
    let (g, manifest) = load_graph(graph_dir)?;
    let m = metrics_report(&g, MetricsOptions::default());
    Ok(CompareRow {
        graph: graph_dir.display().to_string(),
        strategy: manifest.strategy,
        avg_hop: m.avg_hop,
        p6: m.neighborhood.as_ref().map(|nf| nf.at(6)),
        degeneracy: m.degeneracy,
        tail_ratio_in: m.tail_ratio_in,
        clustering_lt20: m.clustering.mean_below(COMPARE_CLUSTERING_DEGREE),
    })
}

/// One row per input graph, in input order.
pub fn run_compare(graph_dirs: &[PathBuf]) -> Result<Vec<CompareRow>> {
    if graph_dirs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "compare needs at least 2 graphs, got {}",
            graph_dirs.len()
        )));
    }
    // fail on schema differences before any heavy work
    for dir in graph_dirs {
        load_manifest(dir)?;
    }
    graph_dirs.iter().map(|d| compare_row(d)).collect()
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out =
        String::from("graph,strategy,avg_hop,p6,degeneracy,tail_ratio_in,clustering_lt20\n");
    for r in rows {
        let graph = if r.graph.contains([',', '"', '\n']) {
            format!("\"{}\"", r.graph.replace('"', "\"\""))
        } else {
            r.graph.clone()
        };
        writeln!(
            out,
            "{graph},{},{},{},{},{},{}",
            r.strategy.as_deref().unwrap_or(""),
            opt(r.avg_hop),
            opt(r.p6),
            r.degeneracy,
            opt(r.tail_ratio_in),
            opt(r.clustering_lt20)
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub source: NodeId,
    pub target: NodeId,
    pub nodes: Vec<NodeId>,
    pub rewards: Option<GsiReward>,
    pub text: String,
}

/// Chain records from a build directory's chain log.
pub fn export_chains(graph_dir: &Path) -> Result<Vec<ChainRecord>> {
    let path = graph_dir.join(CHAIN_LOG_FILE);
    if !path.exists() {
        return Err(Error::MissingChainLog(path));
    }
    let entries: Vec<ChainLogEntry> = read_jsonl(&path)?;
    Ok(entries
        .into_iter()
        .map(|e| ChainRecord {
            source: e.source,
            target: e.target,
            nodes: e.nodes,
            rewards: e.rewards,
            text: e.text,
        })
        .collect())
}
