use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};

use socialforge::config::RunConfig;
use socialforge::io::{write_jsonl, MaybeGzWriter};
use socialforge::metrics::MetricsOptions;
use socialforge::pipeline::{
    compare_csv, export_chains, run_build, run_compare, run_metrics, run_synth, write_build,
    write_metrics,
};
use socialforge::profiles::ProfileTable;
use socialforge::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Synthetic social graph generation and measurement.
///
/// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime
/// failure, 3 output written but completion stopped early.
#[derive(Parser, Debug)]
#[command(name = "socialforge", version)]
struct Cli {
    /// JSON run configuration; defaults apply to missing fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Gzip the JSON-lines outputs.
    #[arg(long, global = true)]
    gzip: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic bot profiles to <out>/profiles.jsonl.
    Synth {
        /// Node count (default: the strategy's n_bots).
        #[arg(long)]
        n: Option<usize>,
        /// Community count (default: the strategy's n_communities).
        #[arg(long)]
        communities: Option<usize>,
    },
    /// Build a graph with the configured strategy into <out>.
    Build,
    /// Write metrics.json and metrics.csv for a graph directory into <out>.
    Metrics {
        graph: PathBuf,
        /// Also emit power-of-two binned degree counts.
        #[arg(long)]
        log_bins: bool,
    },
    /// Side-by-side summary of two or more graph directories, written to
    /// <out>/compare.csv and stdout.
    Compare {
        #[arg(required = true)]
        graphs: Vec<PathBuf>,
    },
    /// Export logged completion chains of a build to <out>/chains.jsonl.
    ExportChains { graph: PathBuf },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let config = config.resolve();
    config.validate()?;
    Ok(config)
}

fn with_gz(path: PathBuf, gzip: bool) -> PathBuf {
    if gzip {
        let mut s = path.into_os_string();
        s.push(".gz");
        s.into()
    } else {
        path
    }
}

fn save_table(table: &ProfileTable, path: &Path) -> Result<(), Failure> {
    let mut w = MaybeGzWriter::create(path)?;
    table.write_jsonl(&mut w)?;
    w.finish()?;
    Ok(())
}

/// Returns `true` when the output is partial.
fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth { n, communities } => {
            let config = load_config(cli)?;
            let build = config.strategy.build();
            let n = n.or(build.map(|b| b.n_bots));
            let k = communities.or(build.map(|b| b.n_communities));
            let (Some(n), Some(k)) = (n, k) else {
                return Err(Failure::Validation(format!(
                    "strategy {} has no population; pass --n and --communities",
                    config.strategy.name()
                )));
            };
            if k == 0 || k > n {
                return Err(Failure::Validation(format!(
                    "need 1 <= communities <= n, got {k} for n = {n}"
                )));
            }
            let table = run_synth(&config, n, k)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = with_gz(cli.out.join("profiles.jsonl"), cli.gzip);
            save_table(&table, &path)?;
            info!("wrote {} profiles to {}", table.len(), path.display());
            Ok(false)
        }
        Command::Build => {
            let config = load_config(cli)?;
            let started = std::time::Instant::now();
            let output = run_build(&config)?;
            write_build(&output, &cli.out, cli.gzip)?;
            let r = &output.report;
            println!(
                "{}: {} nodes, {} follow edges, {} interactions{}",
                r.strategy,
                r.node_count,
                r.follow_count,
                r.interaction_count,
                r.completion
                    .as_ref()
                    .map(|c| format!(
                        ", reachability {:.4} after {} iterations",
                        c.final_reachability, c.iterations_used
                    ))
                    .unwrap_or_default()
            );
            info!("build finished in {:.2?}", started.elapsed());
            if r.partial {
                warn!("completion stopped at its iteration bound; output flagged partial");
            }
            Ok(r.partial)
        }
        Command::Metrics { graph, log_bins } => {
            let report = run_metrics(
                graph,
                MetricsOptions {
                    log_bins: *log_bins,
                },
            )?;
            write_metrics(&report, &cli.out)?;
            info!(
                "wrote metrics for {} to {}",
                graph.display(),
                cli.out.display()
            );
            Ok(false)
        }
        Command::Compare { graphs } => {
            let rows = run_compare(graphs)?;
            let csv = compare_csv(&rows);
            std::fs::create_dir_all(&cli.out)?;
            std::fs::write(cli.out.join("compare.csv"), &csv)?;
            print!("{csv}");
            Ok(false)
        }
        Command::ExportChains { graph } => {
            let records = export_chains(graph)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = with_gz(cli.out.join("chains.jsonl"), cli.gzip);
            write_jsonl(&path, &records)?;
            info!("exported {} chains to {}", records.len(), path.display());
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOCIALFORGE_LOG", "info"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Validation(msg)) => {
            error!("{msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            error!("{msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
