use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sparse_pivot::{BreakMode, EvalScope, SampleSize, SparsePivotParams, TriggerMode};
use sparse_pivot_bench::dataset::{
    build_drift_graph, load_points, load_snap_edgelist, reported_density, ColumnSelect, DistanceMode, DriftConfig,
    StaticGraph,
};
use sparse_pivot_bench::experiment::{run_experiment, Algo, RunConfig, RunSummary};
use sparse_pivot_bench::summarize::{summarize_glob, write_aggregate};

/// Dynamic correlation clustering experiments.
///
/// Every flag can also be set through an environment variable named
/// `SPARSE_PIVOT_<FLAG>` (upper case, dashes as underscores).
#[derive(Parser)]
#[command(name = "sparse-pivot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one dataset and seed, writing metrics as CSV.
    Run(RunArgs),
    /// Run several algorithms and seeds concurrently, one CSV per run.
    Sweep(SweepArgs),
    /// Aggregate the summary rows of metrics CSVs matching a glob pattern.
    Summarize {
        #[arg(long, env = "SPARSE_PIVOT_GLOB")]
        glob: String,
        #[arg(long, env = "SPARSE_PIVOT_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Snap,
    Drift,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Sparse,
    Reference,
    Singletons,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Sparse => Algo::Sparse,
            AlgoArg::Reference => Algo::Reference,
            AlgoArg::Singletons => Algo::Singletons,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RecomputeMode {
    Deletions,
    Updates,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Algorithm,
    True,
}

#[derive(Args, Clone)]
struct DatasetArgs {
    #[arg(long, env = "SPARSE_PIVOT_DATASET")]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "snap", env = "SPARSE_PIVOT_FORMAT")]
    format: Format,
    /// Drift: mean pairwise distance is divided by this to get the radius.
    #[arg(long, default_value_t = 20.0, env = "SPARSE_PIVOT_DIVISOR")]
    divisor: f64,
    /// Drift: columns forming the point, e.g. `all`, `1..`, `1..130`.
    #[arg(long, default_value = "all", env = "SPARSE_PIVOT_COLUMNS")]
    columns: String,
    /// Drift: estimate the mean distance from this many random pairs
    /// instead of all pairs.
    #[arg(long, env = "SPARSE_PIVOT_DISTANCE_SAMPLES")]
    distance_samples: Option<usize>,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.1, env = "SPARSE_PIVOT_EPSILON")]
    epsilon: f64,
    #[arg(long = "est-epsilon", env = "SPARSE_PIVOT_EST_EPSILON")]
    est_epsilon: Option<f64>,
    #[arg(long = "L-coeff", default_value_t = 5.0, env = "SPARSE_PIVOT_L_COEFF")]
    l_coeff: f64,
    /// Neighbor samples per sampled lookup; default derives it from ε and n.
    #[arg(long, env = "SPARSE_PIVOT_SAMPLE_SIZE")]
    sample_size: Option<usize>,
    #[arg(long, default_value_t = 0.8, env = "SPARSE_PIVOT_INSERT_PROB")]
    insert_prob: f64,
    #[arg(long, default_value_t = 50, env = "SPARSE_PIVOT_MEASURE_EVERY")]
    measure_every: usize,
    #[arg(long, value_enum, default_value = "deletions", env = "SPARSE_PIVOT_RECOMPUTE_MODE")]
    recompute_mode: RecomputeMode,
    /// Cheap majority-vote cut of each cluster; `off` uses the sampled cost
    /// estimates over the degree-threshold grid.
    #[arg(long, value_enum, default_value = "on", env = "SPARSE_PIVOT_HEURISTIC_BREAK")]
    heuristic_break: Switch,
    /// Exact costs over the threshold grid; overrides `--heuristic-break`.
    #[arg(long, value_enum, default_value = "off", env = "SPARSE_PIVOT_EXACT_MODE")]
    exact_mode: Switch,
    /// Score against the graph the algorithm sees, or drop soft-deleted nodes.
    #[arg(long, value_enum, default_value = "algorithm", env = "SPARSE_PIVOT_EVAL")]
    eval: Scope,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "sparse", env = "SPARSE_PIVOT_ALGO")]
    algo: AlgoArg,
    #[arg(long, default_value_t = 0, env = "SPARSE_PIVOT_SEED")]
    seed: u64,
    /// Output CSV; stdout when omitted.
    #[arg(long, env = "SPARSE_PIVOT_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sparse,reference", env = "SPARSE_PIVOT_ALGOS")]
    algos: Vec<AlgoArg>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4", env = "SPARSE_PIVOT_SEEDS")]
    seeds: Vec<u64>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1, env = "SPARSE_PIVOT_JOBS")]
    jobs: usize,
    /// Directory for `<algo>-seed<k>.csv` files.
    #[arg(long, env = "SPARSE_PIVOT_OUT_DIR")]
    out_dir: PathBuf,
}

fn load_graph(args: &DatasetArgs, seed: u64) -> Result<StaticGraph> {
    match args.format {
        Format::Snap => load_snap_edgelist(&args.dataset).with_context(|| format!("loading {}", args.dataset.display())),
        Format::Drift => {
            let columns: ColumnSelect = args.columns.parse()?;
            let points = load_points(&args.dataset, &columns)?;
            let config = DriftConfig {
                points,
                divisor: args.divisor,
                distance: args.distance_samples.map_or(DistanceMode::Exact, DistanceMode::Sampled),
            };
            let g = build_drift_graph(&config, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let reported = reported_density(args.divisor).map_or_else(String::new, |d| format!(" (reference {d})"));
            eprintln!(
                "drift graph: {} nodes, {} edges, density {:.2}{reported}",
                g.node_count(),
                g.edge_count,
                g.density()
            );
            Ok(g)
        }
    }
}

fn run_config(p: &ParamArgs, algo: AlgoArg, seed: u64) -> Result<RunConfig> {
    if !(p.insert_prob > 0.0 && p.insert_prob <= 1.0) {
        bail!("--insert-prob must lie in (0, 1]");
    }
    if p.measure_every == 0 {
        bail!("--measure-every must be at least 1");
    }
    if !(p.epsilon > 0.0 && p.epsilon < 1.0) {
        bail!("--epsilon must lie in (0, 1)");
    }
    let break_mode = match (p.exact_mode, p.heuristic_break) {
        (Switch::On, _) => BreakMode::Exact,
        (Switch::Off, Switch::On) => BreakMode::Heuristic,
        (Switch::Off, Switch::Off) => BreakMode::Estimate,
    };
    let params = SparsePivotParams {
        eps: p.epsilon,
        est_eps: p.est_epsilon,
        l_coeff: p.l_coeff,
        sample_size: p.sample_size.map_or(SampleSize::Auto, SampleSize::Fixed),
        break_mode,
        ..SparsePivotParams::default()
    };
    Ok(RunConfig {
        algo: algo.into(),
        params,
        insert_prob: p.insert_prob,
        measure_every: p.measure_every,
        seed,
        recompute: match p.recompute_mode {
            RecomputeMode::Deletions => TriggerMode::DeletionsOnly,
            RecomputeMode::Updates => TriggerMode::AllUpdates,
        },
        scope: match p.eval {
            Scope::Algorithm => EvalScope::AlgorithmView,
            Scope::True => EvalScope::TrueGraph,
        },
    })
}

fn run_to(graph: &StaticGraph, config: &RunConfig, out: Option<&Path>) -> Result<RunSummary> {
    let summary = match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            run_experiment(graph, config, Some(BufWriter::new(file)))?
        }
        None => run_experiment(graph, config, Some(io::stdout().lock()))?,
    };
    Ok(summary)
}

fn report(label: &str, s: &RunSummary) {
    let norm = s.mean_normalized.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "{label}: {} steps, mean normalized {norm}, {} ops, {} recomputes, {:.1} ms",
        s.steps, s.total_ops, s.recomputes, s.ms
    );
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => {
            let config = run_config(&args.params, args.algo, args.seed)?;
            let graph = load_graph(&args.data, args.seed)?;
            let s = run_to(&graph, &config, args.out.as_deref())?;
            report(&config.algo.to_string(), &s);
            if let Some(msg) = s.error {
                bail!(msg);
            }
        }
        Command::Sweep(args) => {
            let graph = load_graph(&args.data, 0)?;
            std::fs::create_dir_all(&args.out_dir)?;
            let mut jobs = Vec::new();
            for &algo in &args.algos {
                for &seed in &args.seeds {
                    jobs.push(run_config(&args.params, algo, seed)?);
                }
            }
            let workers = args.jobs.max(1);
            let next = std::sync::atomic::AtomicUsize::new(0);
            let failures = std::sync::atomic::AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let Some(config) = jobs.get(i) else { break };
                        let path = args.out_dir.join(format!("{}-seed{}.csv", config.algo, config.seed));
                        let label = path.display().to_string();
                        match run_to(&graph, config, Some(&path)) {
                            Ok(s) => {
                                if s.error.is_some() {
                                    failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                }
                                report(&label, &s);
                            }
                            Err(e) => {
                                failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                eprintln!("{label}: {e:#}");
                            }
                        }
                    });
                }
            });
            let failed = failures.into_inner();
            if failed > 0 {
                bail!("{failed} runs failed");
            }
        }
        Command::Summarize { glob, out } => {
            let agg = summarize_glob(&glob)?;
            match out {
                Some(path) => write_aggregate(&agg, File::create(&path)?)?,
                None => write_aggregate(&agg, io::stdout().lock())?,
            }
            io::stdout().flush()?;
        }
    }
    Ok(())
}
