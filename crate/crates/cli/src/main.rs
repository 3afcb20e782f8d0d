use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use planarflow::io::{self, FlowReport, LoadingSummary, ManifestParams, RunManifest, SolutionFile};
use planarflow::oracle::{self, DEFAULT_STATE_CAP};
use planarflow::sampler::{self, ExitCondition, SamplerConfig, SolutionSet, DEFAULT_MAX_TOTAL_ITER};
use planarflow::{metrics, synth, AugmentStrategy, OracleError, PlanarRoadGraph};
use rayon::prelude::*;
use serde::Serialize;

mod files;

use files::{write_atomic, Failure};

/// Sample diverse integer maximum flows on planar road networks.
#[derive(Parser)]
#[command(name = "planarflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one maximum flow and its unit paths.
    Maxflow(MaxflowArgs),
    /// Sample a k-optimal set of maximum flows.
    Sample(SampleArgs),
    /// Check the chain exactly on a small graph.
    Validate(ValidateArgs),
    /// Road loading of one or more solution files.
    Metrics(MetricsArgs),
    /// Write a rectangular grid network.
    GenGrid(GenGridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Bfs,
    Dijkstra,
}

impl From<Strategy> for AugmentStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Bfs => AugmentStrategy::BreadthFirst,
            Strategy::Dijkstra => AugmentStrategy::ShortestLength,
        }
    }
}

#[derive(Args)]
struct MaxflowArgs {
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "bfs")]
    strategy: Strategy,
    /// Flow report (JSON).
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the flow as a one-member solution file.
    #[arg(long)]
    solutions_out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("exit").required(true).args(["num_iter", "target_solutions"])))]
struct SampleArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    lambda: f64,
    /// Maximum number of roads two kept solutions may share.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    mix_iter: u64,
    /// Run for a fixed number of sampling iterations.
    #[arg(long)]
    num_iter: Option<u64>,
    /// Run until this many solutions are kept.
    #[arg(long)]
    target_solutions: Option<usize>,
    /// Iteration budget for `--target-solutions`.
    #[arg(long, requires = "target_solutions", default_value_t = DEFAULT_MAX_TOTAL_ITER)]
    max_total_iter: u64,
    /// Sampling frequency.
    #[arg(long, default_value_t = 25)]
    sf: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent runs; run `i` uses random stream `i` of the seed.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Max-flow rule for the starting state.
    #[arg(long, value_enum, default_value = "bfs")]
    strategy: Strategy,
    /// Solution file; with `--runs` above 1, per-run files are named
    /// `<stem>.run<i>.json` next to it and a summary goes to `<out>`.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Simulated steps for the convergence trajectory.
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    /// Largest state space to enumerate.
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    cap: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    graph: PathBuf,
    /// Solution files; all their solutions are pooled.
    #[arg(required = true)]
    solutions: Vec<PathBuf>,
    /// Writes `<prefix>.loads.tsv`, `<prefix>.summary.json` and
    /// `<prefix>.geojson`.
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct GenGridArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Edge length in meters.
    #[arg(long, default_value_t = 100.0)]
    length: f64,
    #[arg(long, default_value_t = 1)]
    capacity: i64,
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Maxflow(a) => maxflow(a),
        Command::Sample(a) => sample(a),
        Command::Validate(a) => validate(a),
        Command::Metrics(a) => metrics(a),
        Command::GenGrid(a) => gen_grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn load_graph(path: &Path) -> Result<Arc<PlanarRoadGraph>, Failure> {
    let text = files::read(path)?;
    let graph =
        io::load_graph(&text).with_context(|| format!("invalid graph {}", path.display())).map_err(Failure::Invalid)?;
    Ok(Arc::new(graph))
}

fn write_manifest(out: &Path, manifest: RunManifest) -> Result<(), Failure> {
    write_atomic(&manifest_path(out), manifest.to_json().as_bytes())
}

fn manifest(
    graph: Option<(&Path, &PlanarRoadGraph)>,
    seed: Option<u64>,
    params: ManifestParams,
    outputs: Vec<String>,
) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        graph_path: graph.map(|(p, _)| display(p)),
        graph_fingerprint: graph.map(|(_, g)| g.fingerprint()),
        seed,
        params,
        outputs,
    }
}

fn maxflow(a: MaxflowArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.graph)?;
    let strategy = AugmentStrategy::from(a.strategy);
    let state = planarflow::initial_state(&graph, strategy);
    write_atomic(&a.out, FlowReport::new(&state, strategy).to_json().as_bytes())?;
    let mut outputs = vec![display(&a.out)];
    if let Some(path) = &a.solutions_out {
        let set: SolutionSet = [sampler::Solution::new(state.clone(), 0, 0)].into_iter().collect();
        write_atomic(path, SolutionFile::from_set(&graph, &set, state.mf()).to_json().as_bytes())?;
        outputs.push(display(path));
    }
    println!("max flow {} over {} m", state.mf(), state.total_length());
    write_manifest(&a.out, manifest(Some((&a.graph, &graph)), None, ManifestParams::Maxflow { strategy }, outputs))
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    file: String,
    solutions: usize,
    iterations: u64,
    exhausted: bool,
    avg_solution_length: f64,
    normalized_mean: f64,
}

fn sample(a: SampleArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.graph)?;
    let exit = match (a.num_iter, a.target_solutions) {
        (Some(num_iter), None) => ExitCondition::FixedIterations { num_iter },
        (None, Some(solutions)) => ExitCondition::TargetCount { solutions, max_total_iter: a.max_total_iter },
        _ => unreachable!("clap enforces exactly one exit condition"),
    };
    let config = SamplerConfig {
        lambda: a.lambda,
        k: a.k,
        mix_iter: a.mix_iter,
        sf: a.sf,
        exit,
        seed: a.seed,
        stream: 0,
        initial: a.strategy.into(),
    };
    config.validate().context("invalid sampler settings").map_err(Failure::Invalid)?;
    if a.runs == 0 {
        return Err(Failure::Invalid(anyhow::anyhow!("--runs must be at least 1")));
    }

    let paths: Vec<PathBuf> = if a.runs == 1 {
        vec![a.out.clone()]
    } else {
        let stem = a.out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (0..a.runs).map(|i| a.out.with_file_name(format!("{stem}.run{i}.json"))).collect()
    };
    let summaries: Vec<RunSummary> = paths
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let cfg = SamplerConfig { stream: i as u64, ..config };
            let run =
                sampler::sample_koptimal(&graph, &cfg).context("invalid sampler settings").map_err(Failure::Invalid)?;
            let mf = planarflow::max_flow(&graph, cfg.initial).value() as usize;
            let mut file = SolutionFile::from_set(&graph, &run.set, mf);
            file.config = Some(cfg);
            file.iterations = Some(run.iterations);
            file.exhausted = run.exhausted;
            write_atomic(path, file.to_json().as_bytes())?;
            let (avg, norm) = match metrics::edge_loading(run.set.states()) {
                Ok(r) => (r.avg_solution_length, r.normalized_mean),
                Err(_) => (0.0, 0.0),
            };
            if run.exhausted {
                log::warn!("run {i}: budget of {} iterations exhausted", run.iterations);
            }
            Ok(RunSummary {
                run: i,
                file: display(path),
                solutions: run.set.len(),
                iterations: run.iterations,
                exhausted: run.exhausted,
                avg_solution_length: avg,
                normalized_mean: norm,
            })
        })
        .collect::<Result<_, Failure>>()?;

    let mut outputs: Vec<String> = summaries.iter().map(|s| s.file.clone()).collect();
    if a.runs > 1 {
        let text = serde_json::to_string_pretty(&summaries).expect("serializable") + "\n";
        write_atomic(&a.out, text.as_bytes())?;
        outputs.push(display(&a.out));
    }
    for s in &summaries {
        println!(
            "run {}: {} solution(s) in {} iterations{}",
            s.run,
            s.solutions,
            s.iterations,
            if s.exhausted { " (budget exhausted)" } else { "" }
        );
    }
    let params = ManifestParams::Sample { config, runs: a.runs };
    write_manifest(&a.out, manifest(Some((&a.graph, &graph)), Some(a.seed), params, outputs))
}

fn validate(a: ValidateArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.graph)?;
    if !(a.lambda.is_finite() && a.lambda > 0.0) {
        return Err(Failure::Invalid(anyhow::anyhow!("lambda must be positive and finite")));
    }
    let report = oracle::diagnose(&graph, a.lambda, a.steps, a.cap, a.seed).map_err(|e| match e {
        OracleError::CapExceeded { .. } => Failure::Refused(anyhow::Error::new(e)),
        other => Failure::Invalid(anyhow::Error::new(other)),
    })?;
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    write_atomic(&a.out, text.as_bytes())?;
    println!(
        "|states| = {}, detailed-balance residual {:.3e}, strongly connected: {}, final TV {}",
        report.states,
        report.max_detailed_balance_residual,
        report.strongly_connected,
        report.tv_trajectory.last().map_or("n/a".to_string(), |p| format!("{:.4}", p.tv)),
    );
    let params = ManifestParams::Validate { lambda: a.lambda, steps: a.steps, cap: a.cap, seed: a.seed };
    write_manifest(&a.out, manifest(Some((&a.graph, &graph)), Some(a.seed), params, vec![display(&a.out)]))
}

fn metrics(a: MetricsArgs) -> Result<(), Failure> {
    let graph = load_graph(&a.graph)?;
    let mut pooled = SolutionSet::new();
    for path in &a.solutions {
        let text = files::read(path)?;
        let set = SolutionFile::parse(&text)
            .and_then(|f| f.to_set(&graph))
            .with_context(|| format!("solution file {}", path.display()))
            .map_err(Failure::Invalid)?;
        for s in set.solutions() {
            pooled.push(s.clone());
        }
    }
    let report = metrics::edge_loading(pooled.states()).context("loading").map_err(Failure::Invalid)?;
    let with_suffix = |suffix: &str| {
        let mut s = a.out_prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    let (table, summary, geo) = (with_suffix(".loads.tsv"), with_suffix(".summary.json"), with_suffix(".geojson"));
    write_atomic(&table, io::loading_table(&graph, &report).as_bytes())?;
    let text = serde_json::to_string_pretty(&LoadingSummary::from(&report)).expect("serializable") + "\n";
    write_atomic(&summary, text.as_bytes())?;
    write_atomic(&geo, io::loading_geojson(&graph, &report).as_bytes())?;
    println!(
        "{} solution(s), {} loaded roads, normalized mean load {:.3}",
        report.solutions, report.loaded_edge_count, report.normalized_mean
    );
    let params = ManifestParams::Metrics { solutions: a.solutions.iter().map(|p| display(p)).collect() };
    let outputs = vec![display(&table), display(&summary), display(&geo)];
    write_manifest(&summary, manifest(Some((&a.graph, &graph)), None, params, outputs))
}

fn gen_grid(a: GenGridArgs) -> Result<(), Failure> {
    if a.rows == 0 || a.cols == 0 || a.rows * a.cols < 2 {
        return Err(Failure::Invalid(anyhow::anyhow!("grid needs at least two nodes")));
    }
    if !(a.length.is_finite() && a.length > 0.0) || a.capacity < 1 {
        return Err(Failure::Invalid(anyhow::anyhow!("length and capacity must be positive")));
    }
    let spec = synth::grid_spec(a.rows, a.cols, a.length, a.capacity);
    write_atomic(&a.out, io::graph_document(&spec).as_bytes())?;
    let params = ManifestParams::GenGrid { rows: a.rows, cols: a.cols, length: a.length, capacity: a.capacity };
    write_manifest(&a.out, manifest(None, None, params, vec![display(&a.out)]))
}
