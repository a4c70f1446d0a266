use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nobn::analysis::{fdo_rows, log_grid, GammaConfig};
use nobn::bench::{
    parse_algorithm, parse_mode, parse_ordering, parse_solver, run_accuracy_experiment,
    run_runtime_experiment, write_csv, AccuracyConfig, AlgoSpec, PriorSetting, RuntimeConfig,
};
use nobn::io::{load_network, load_queries, save_network, write_network_stream};
use nobn_core::hybrid::{infer, rank_posteriors, Algorithm, HybridConfig, TransformOrder};
use nobn_core::synth::{
    gen_queries, scramble_priors, NetworkSpec, NetworkStream, QueryMode, QuerySpec, ScrambleSpec,
};
use nobn_core::variational::{Solver, XiCache};

#[derive(Parser)]
#[command(
    name = "nobn",
    version,
    about = "Exact and variational inference on noisy-or networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank diseases for every query in a JSON Lines file.
    Infer(InferArgs),
    /// Generate a synthetic network.
    GenNetwork(GenNetworkArgs),
    /// Generate labelled queries for a network.
    GenQueries(GenQueriesArgs),
    /// Write a copy of a network with redrawn priors.
    ScramblePriors(ScrambleArgs),
    /// Time algorithms over growing positive-finding counts.
    BenchRuntime(BenchRuntimeArgs),
    /// Top-1/top-3 accuracy over query modes and prior scrambles.
    BenchAccuracy(BenchAccuracyArgs),
    /// Degree-vs-ξ and γ traces for the ordering analysis.
    AnalyzeFdo(AnalyzeArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Output {
    fn open(&self) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.output {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn path(&self) -> anyhow::Result<&Path> {
        self.output.as_deref().context("--output is required")
    }
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    network: PathBuf,
    /// JSON Lines query file.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "quickscore", value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long, default_value = "cvx", value_parser = parse_solver)]
    solver: Solver,
    #[arg(long, default_value = "fdo", value_parser = parse_ordering)]
    ordering: TransformOrder,
    #[arg(long, default_value_t = 0)]
    n_variational: usize,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenNetworkArgs {
    /// Start from a named shape: f120 or s1.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    diseases: Option<u32>,
    #[arg(long)]
    symptoms: Option<u32>,
    #[arg(long)]
    density: Option<f64>,
    /// `lo,hi`
    #[arg(long, value_parser = parse_range)]
    prior_range: Option<(f64, f64)>,
    /// `lo,hi`
    #[arg(long, value_parser = parse_range)]
    edge_prob_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct GenQueriesArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: QueryMode,
    #[arg(long, default_value_t = 800)]
    count: usize,
    #[arg(long, default_value_t = 8.0)]
    avg_positive: f64,
    #[arg(long, default_value_t = 4.0)]
    avg_negative: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct ScrambleArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    mean_prior: f64,
    /// Bates component count.
    #[arg(long, default_value_t = nobn_core::synth::DEFAULT_BATES_M)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct BenchRuntimeArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10,12,14,16")]
    positive_counts: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "quickscore,jj99+cvx+gdo,jj99+ppf+fdo,vfh+cvx+fdo,jh+cvx+fdo"
    )]
    algorithms: Vec<AlgoSpec>,
    #[arg(long, default_value_t = 8)]
    n_variational: usize,
    #[arg(long, default_value_t = 20)]
    queries: usize,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct BenchAccuracyArgs {
    #[arg(long)]
    network: PathBuf,
    /// Comma list of mean priors; `true` keeps the network's priors.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.001,0.002,0.005,0.01,0.02,0.05"
    )]
    mean_prior_grid: Vec<PriorSetting>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "random20,chronic20,chronic40,confuse20")]
    mode: Vec<QueryMode>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "quickscore,jj99+cvx+gdo,vfh+cvx+fdo,vfh+ppf+fdo,jh+cvx+fdo"
    )]
    algorithms: Vec<AlgoSpec>,
    #[arg(long, default_value_t = 2)]
    n_variational: usize,
    #[arg(long, default_value_t = 800)]
    queries_per_cell: usize,
    /// Use 200 queries per cell.
    #[arg(long, conflicts_with = "queries_per_cell")]
    desk: bool,
    #[arg(long, default_value_t = nobn_core::synth::DEFAULT_BATES_M)]
    m: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value_t = 60)]
    grid_points: usize,
    #[arg(long, default_value_t = 2000)]
    diseases: u32,
    #[arg(long, default_value_t = 400)]
    symptoms: u32,
    #[arg(long, default_value_t = 0.003)]
    density: f64,
    #[arg(long, default_value_t = 2)]
    set_size: usize,
    #[arg(long, default_value_t = 50)]
    sets: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value = "cvx", value_parser = parse_solver)]
    solver: Solver,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

fn infer_cmd(a: &InferArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let queries = load_queries(&net, &a.query)?;
    let config = HybridConfig::new(a.algorithm, a.solver, a.ordering, a.n_variational);
    let mut cache = XiCache::new();
    let mut w = a.out.open()?;
    writeln!(w, "query,evidence,rank,disease,name,posterior")?;
    for (k, q) in queries.iter().enumerate() {
        let n = match config.algorithm {
            Algorithm::Brute | Algorithm::Quickscore => 0,
            _ => config.n_variational,
        };
        let out = infer(
            &net,
            q,
            &HybridConfig {
                n_variational: n,
                ..config
            },
            &mut cache,
        )
        .with_context(|| format!("query {}", k + 1))?;
        for (rank, d) in rank_posteriors(&out.posteriors, a.top_k)
            .into_iter()
            .enumerate()
        {
            let disease = net.disease(d);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                k + 1,
                out.evidence,
                rank + 1,
                disease.key,
                csv_field(&disease.name),
                out.posteriors[d.index()]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn gen_network_cmd(a: &GenNetworkArgs) -> anyhow::Result<()> {
    let mut spec = match a.preset.as_deref() {
        Some("f120") => NetworkSpec::f120_like(a.seed),
        Some("s1") => NetworkSpec::s1_like(a.seed),
        Some(other) => bail!(UsageError(format!("unknown preset `{other}`"))),
        None => NetworkSpec::f120_like(a.seed),
    };
    if let Some(x) = a.diseases {
        spec.n_diseases = x;
    }
    if let Some(x) = a.symptoms {
        spec.n_symptoms = x;
    }
    if let Some(x) = a.density {
        spec.density = x;
    }
    if let Some(x) = a.prior_range {
        spec.prior_range = x;
    }
    if let Some(x) = a.edge_prob_range {
        spec.edge_prob_range = x;
    }
    let stream = NetworkStream::new(spec)?;
    let mut w = a.out.open()?;
    write_network_stream(&mut w, stream)?;
    Ok(())
}

fn gen_queries_cmd(a: &GenQueriesArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let spec = QuerySpec {
        mode: a.mode,
        count: a.count,
        avg_positive: a.avg_positive,
        avg_negative: a.avg_negative,
        seed: a.seed,
    };
    let queries = gen_queries(&net, &spec)?;
    let mut w = a.out.open()?;
    nobn::io::write_queries(&mut w, &net, &queries)?;
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn scramble_cmd(a: &ScrambleArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let spec = ScrambleSpec {
        mean_prior: a.mean_prior,
        m: a.m,
        seed: a.seed,
    };
    let scrambled = scramble_priors(&net, &spec)?;
    let out = a.out.path()?;
    if same_file(out, &a.network) {
        bail!(UsageError("refusing to overwrite the input network".into()));
    }
    save_network(out, &scrambled)?;
    Ok(())
}

fn bench_runtime_cmd(a: &BenchRuntimeArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let config = RuntimeConfig {
        positive_counts: a.positive_counts.clone(),
        algorithms: a.algorithms.clone(),
        n_variational: a.n_variational,
        n_queries: a.queries,
        repetitions: a.repetitions,
        seed: a.seed,
    };
    let rows = run_runtime_experiment(&net, &config)?;
    write_csv(a.out.open()?, &rows)?;
    Ok(())
}

fn bench_accuracy_cmd(a: &BenchAccuracyArgs) -> anyhow::Result<()> {
    let net = load_network(&a.network)?;
    let mut config = AccuracyConfig::new(a.mean_prior_grid.clone(), a.seed);
    config.modes = a.mode.clone();
    config.algorithms = a.algorithms.clone();
    config.n_variational = a.n_variational;
    config.queries_per_cell = if a.desk { 200 } else { a.queries_per_cell };
    config.bates_m = a.m;
    let rows = run_accuracy_experiment(&net, &config)?;
    write_csv(a.out.open()?, &rows)?;
    Ok(())
}

fn analyze_cmd(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let config = GammaConfig {
        n_diseases: a.diseases,
        n_symptoms: a.symptoms,
        density: a.density,
        set_size: a.set_size,
        n_sets: a.sets,
        samples: a.samples,
        solver: a.solver,
        seed: a.seed,
    };
    let rows = fdo_rows(&log_grid(0.01, 50.0, a.grid_points), &config)?;
    write_csv(a.out.open()?, &rows)?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Infer(a) => infer_cmd(a),
        Command::GenNetwork(a) => gen_network_cmd(a),
        Command::GenQueries(a) => gen_queries_cmd(a),
        Command::ScramblePriors(a) => scramble_cmd(a),
        Command::BenchRuntime(a) => bench_runtime_cmd(a),
        Command::BenchAccuracy(a) => bench_accuracy_cmd(a),
        Command::AnalyzeFdo(a) => analyze_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
