//! Runtime and accuracy experiments.
//!
//! Both experiments are fully determined by their config and seed except for
//! the wall-clock columns. Timing covers inference only: networks and queries
//! are prepared beforehand, and every runtime cell is run once untimed first.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nobn_core::hybrid::{
    infer_with_probe, rank_posteriors, Algorithm, Counters, HybridConfig, StageProbe,
    TransformOrder,
};
use nobn_core::synth::{
    gen_queries, random_findings, rng, scramble_priors, QueryMode, QuerySpec, ScrambleSpec,
    DEFAULT_BATES_M,
};
use nobn_core::variational::{Solver, XiCache};
use nobn_core::{DiseaseId, Error, NoisyOrNetwork, Query};
use serde::Serialize;

pub fn algorithm_name(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Brute => "brute",
        Algorithm::Quickscore => "quickscore",
        Algorithm::Jj99 => "jj99",
        Algorithm::Vfh => "vfh",
        Algorithm::Jh => "jh",
    }
}

pub fn solver_name(s: Solver) -> &'static str {
    match s {
        Solver::Cvx => "cvx",
        Solver::Ppf => "ppf",
    }
}

pub fn ordering_name(o: TransformOrder) -> &'static str {
    match o {
        TransformOrder::Gdo => "gdo",
        TransformOrder::Fdo => "fdo",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct NameError {
    pub kind: &'static str,
    pub value: String,
}

pub fn parse_algorithm(s: &str) -> Result<Algorithm, NameError> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "brute" => Algorithm::Brute,
        "quickscore" => Algorithm::Quickscore,
        "jj99" => Algorithm::Jj99,
        "vfh" => Algorithm::Vfh,
        "jh" => Algorithm::Jh,
        _ => {
            return Err(NameError {
                kind: "algorithm",
                value: s.into(),
            })
        }
    })
}

pub fn parse_solver(s: &str) -> Result<Solver, NameError> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "cvx" => Solver::Cvx,
        "ppf" => Solver::Ppf,
        _ => {
            return Err(NameError {
                kind: "solver",
                value: s.into(),
            })
        }
    })
}

pub fn parse_ordering(s: &str) -> Result<TransformOrder, NameError> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "gdo" => TransformOrder::Gdo,
        "fdo" => TransformOrder::Fdo,
        _ => {
            return Err(NameError {
                kind: "ordering",
                value: s.into(),
            })
        }
    })
}

pub fn parse_mode(s: &str) -> Result<QueryMode, NameError> {
    Ok(match s.to_ascii_lowercase().as_str() {
        "random20" => QueryMode::Random20,
        "chronic20" => QueryMode::Chronic20,
        "chronic40" => QueryMode::Chronic40,
        "confuse20" => QueryMode::Confuse20,
        "clean" => QueryMode::Clean,
        _ => {
            return Err(NameError {
                kind: "query mode",
                value: s.into(),
            })
        }
    })
}

/// An algorithm with its solver and ordering, e.g. `vfh+cvx+fdo`.
///
/// `quickscore` and `brute` take no solver or ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlgoSpec {
    pub algorithm: Algorithm,
    pub solver: Solver,
    pub ordering: TransformOrder,
}

impl AlgoSpec {
    pub fn is_exact(&self) -> bool {
        matches!(self.algorithm, Algorithm::Brute | Algorithm::Quickscore)
    }

    pub fn with_n(&self, n_variational: usize) -> HybridConfig {
        let n = if self.is_exact() { 0 } else { n_variational };
        HybridConfig::new(self.algorithm, self.solver, self.ordering, n)
    }

    /// Figure-4 algorithm set.
    pub fn accuracy_defaults() -> Vec<AlgoSpec> {
        [
            "quickscore",
            "jj99+cvx+gdo",
            "vfh+cvx+fdo",
            "vfh+ppf+fdo",
            "jh+cvx+fdo",
        ]
        .iter()
        .map(|s| s.parse().expect("valid default"))
        .collect()
    }
}

impl FromStr for AlgoSpec {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, NameError> {
        let parts: Vec<&str> = s.split('+').collect();
        let algorithm = parse_algorithm(parts[0])?;
        let exact = matches!(algorithm, Algorithm::Brute | Algorithm::Quickscore);
        match (exact, parts.len()) {
            (true, 1) => Ok(AlgoSpec {
                algorithm,
                solver: Solver::Cvx,
                ordering: TransformOrder::Fdo,
            }),
            (false, 3) => Ok(AlgoSpec {
                algorithm,
                solver: parse_solver(parts[1])?,
                ordering: parse_ordering(parts[2])?,
            }),
            _ => Err(NameError {
                kind: "algorithm spec",
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for AlgoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            f.write_str(algorithm_name(self.algorithm))
        } else {
            write!(
                f,
                "{}+{}+{}",
                algorithm_name(self.algorithm),
                solver_name(self.solver),
                ordering_name(self.ordering)
            )
        }
    }
}

fn columns(spec: &AlgoSpec) -> (String, String, String) {
    let (s, o) = if spec.is_exact() {
        ("none", "none")
    } else {
        (solver_name(spec.solver), ordering_name(spec.ordering))
    };
    (algorithm_name(spec.algorithm).into(), s.into(), o.into())
}

/// Splits one seed into independent streams by tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Default)]
struct StageTimer {
    started: Option<Instant>,
    total: Duration,
}

impl StageProbe for StageTimer {
    fn variational_begin(&mut self) {
        self.started = Some(Instant::now());
    }

    fn variational_end(&mut self) {
        if let Some(t) = self.started.take() {
            self.total += t.elapsed();
        }
    }
}

fn add(into: &mut Counters, c: Counters) {
    into.xi_solves += c.xi_solves;
    into.cache_hits += c.cache_hits;
    into.exact_terms += c.exact_terms;
}

/// Whether prior-odds variational parameters come from the shared cache.
fn uses_shared_cache(config: &HybridConfig) -> bool {
    config.n_variational > 0
        && match config.algorithm {
            Algorithm::Vfh | Algorithm::Jh => true,
            Algorithm::Jj99 => config.solver == Solver::Ppf,
            Algorithm::Brute | Algorithm::Quickscore => false,
        }
}

/// Measurements for one pass over a query set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassTiming {
    pub total: Duration,
    pub variational: Duration,
    /// Counters of the successful queries.
    pub counters: Counters,
    /// Queries that failed with impossible evidence or cancellation.
    pub failures: usize,
}

/// Runs `queries` with a fresh cache. When the configuration reads ξ from the
/// shared cache, the cache is first warmed for every symptom; that time is
/// part of the variational step.
pub fn timed_pass(
    net: &NoisyOrNetwork,
    queries: &[Query],
    config: &HybridConfig,
) -> nobn_core::Result<PassTiming> {
    let mut cache = XiCache::new();
    let mut timer = StageTimer::default();
    let mut counters = Counters::default();
    let mut failures = 0;
    let start = Instant::now();
    if uses_shared_cache(config) {
        timer.variational_begin();
        cache.warm(net, config.solver)?;
        timer.variational_end();
        counters.xi_solves += cache.solves();
    }
    for q in queries {
        let n = config.n_variational.min(q.positive.len());
        let cfg = HybridConfig {
            n_variational: n,
            ..*config
        };
        match infer_with_probe(net, q, &cfg, &mut cache, &mut timer) {
            Ok(out) => add(&mut counters, out.counters),
            Err(Error::EvidenceImpossible | Error::Cancellation) => {
                timer.variational_end();
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PassTiming {
        total: start.elapsed(),
        variational: timer.total,
        counters,
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub positive_counts: Vec<usize>,
    pub algorithms: Vec<AlgoSpec>,
    pub n_variational: usize,
    pub n_queries: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.positive_counts.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Spec("runtime grids must be nonempty"));
        }
        if self.n_queries == 0 || self.repetitions == 0 {
            return Err(Error::Spec("query count and repetitions must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRow {
    pub algorithm: String,
    pub solver: String,
    pub ordering: String,
    pub n_positive: usize,
    pub n_variational: usize,
    pub n_queries: usize,
    pub wall_ms_total: f64,
    pub wall_ms_variational_step: f64,
    pub xi_solves: u64,
    pub cache_hits: u64,
    pub exact_terms: u64,
    pub failures: usize,
}

/// Positive-only queries with exactly `k` findings, each with at least one parent.
pub fn runtime_queries(net: &NoisyOrNetwork, k: usize, count: usize, seed: u64) -> Vec<Query> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| Query::positive_only(random_findings(net, k, &mut r)))
        .collect()
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn run_runtime_experiment(
    net: &NoisyOrNetwork,
    config: &RuntimeConfig,
) -> nobn_core::Result<Vec<RuntimeRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &k in &config.positive_counts {
        let queries = runtime_queries(net, k, config.n_queries, derive_seed(config.seed, k as u64));
        for spec in &config.algorithms {
            let hc = spec.with_n(config.n_variational.min(k));
            timed_pass(net, &queries, &hc)?;
            let mut total = Duration::ZERO;
            let mut variational = Duration::ZERO;
            let mut counters = Counters::default();
            let mut failures = 0;
            for _ in 0..config.repetitions {
                let pass = timed_pass(net, &queries, &hc)?;
                total += pass.total;
                variational += pass.variational;
                counters = pass.counters;
                failures = pass.failures;
            }
            let reps = config.repetitions as f64;
            let (algorithm, solver, ordering) = columns(spec);
            rows.push(RuntimeRow {
                algorithm,
                solver,
                ordering,
                n_positive: k,
                n_variational: hc.n_variational,
                n_queries: queries.len(),
                wall_ms_total: ms(total) / reps,
                wall_ms_variational_step: ms(variational) / reps,
                xi_solves: counters.xi_solves,
                cache_hits: counters.cache_hits,
                exact_terms: counters.exact_terms,
                failures,
            });
        }
    }
    Ok(rows)
}

/// Prior setting of one accuracy cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorSetting {
    /// The network's own priors.
    True,
    /// Priors redrawn around this mean.
    Mean(f64),
}

impl fmt::Display for PriorSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSetting::True => f.write_str("true"),
            PriorSetting::Mean(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for PriorSetting {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, NameError> {
        if s.eq_ignore_ascii_case("true") {
            return Ok(PriorSetting::True);
        }
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|m| *m > 0.0 && *m < 0.5)
            .map(PriorSetting::Mean)
            .ok_or_else(|| NameError {
                kind: "mean prior",
                value: s.into(),
            })
    }
}

#[derive(Debug, Clone)]
pub struct AccuracyConfig {
    pub modes: Vec<QueryMode>,
    pub mean_priors: Vec<PriorSetting>,
    pub algorithms: Vec<AlgoSpec>,
    pub n_variational: usize,
    pub queries_per_cell: usize,
    pub avg_positive: f64,
    pub avg_negative: f64,
    pub bates_m: u32,
    pub seed: u64,
}

impl AccuracyConfig {
    /// Four modes, 800 queries per cell, `n = 2`, the five Figure-4 algorithms.
    pub fn new(mean_priors: Vec<PriorSetting>, seed: u64) -> Self {
        AccuracyConfig {
            modes: QueryMode::FALSE_POSITIVE_MODES.to_vec(),
            mean_priors,
            algorithms: AlgoSpec::accuracy_defaults(),
            n_variational: 2,
            queries_per_cell: 800,
            avg_positive: 8.0,
            avg_negative: 4.0,
            bates_m: DEFAULT_BATES_M,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.modes.is_empty() || self.mean_priors.is_empty() || self.algorithms.is_empty() {
            return Err(Error::Spec("accuracy grids must be nonempty"));
        }
        if self.queries_per_cell == 0 {
            return Err(Error::Spec("query count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub mode: String,
    pub mean_prior: String,
    pub algorithm: String,
    pub solver: String,
    pub ordering: String,
    pub n_variational: usize,
    pub top1_accuracy: f64,
    pub top3_accuracy: f64,
    pub n_queries: usize,
    pub failures: usize,
}

/// Fraction of queries whose label is among the first `k` ranked diseases.
pub fn top_k_accuracy(
    rankings: &[Vec<DiseaseId>],
    labels: &[DiseaseId],
    k: usize,
) -> Result<f64, Error> {
    if rankings.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rankings.len(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let hits = rankings
        .iter()
        .zip(labels)
        .filter(|(r, l)| r.iter().take(k).any(|d| d == *l))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Top-3 rankings for every query; failed queries rank nothing.
pub fn rank_queries(
    net: &NoisyOrNetwork,
    queries: &[Query],
    config: &HybridConfig,
    k: usize,
) -> nobn_core::Result<(Vec<Vec<DiseaseId>>, usize)> {
    let mut cache = XiCache::new();
    let mut failures = 0;
    let mut rankings = Vec::with_capacity(queries.len());
    for q in queries {
        let n = config.n_variational.min(q.positive.len());
        let cfg = HybridConfig {
            n_variational: n,
            ..*config
        };
        match infer_with_probe(net, q, &cfg, &mut cache, &mut ()) {
            Ok(out) => rankings.push(rank_posteriors(&out.posteriors, k)),
            Err(Error::EvidenceImpossible | Error::Cancellation) => {
                failures += 1;
                rankings.push(Vec::new());
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rankings, failures))
}

const MODE_TAG: u64 = 0x6d6f6465;
const PRIOR_TAG: u64 = 0x7072696f72;

/// One row per (mode, prior setting, algorithm), in that nesting order.
///
/// Queries are generated per mode from the unscrambled network so that every
/// prior setting and algorithm sees the same queries.
pub fn run_accuracy_experiment(
    net: &NoisyOrNetwork,
    config: &AccuracyConfig,
) -> nobn_core::Result<Vec<AccuracyRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &mode in &config.modes {
        let spec = QuerySpec {
            mode,
            count: config.queries_per_cell,
            avg_positive: config.avg_positive,
            avg_negative: config.avg_negative,
            seed: derive_seed(config.seed, MODE_TAG ^ mode as u64),
        };
        let queries = gen_queries(net, &spec)?;
        let labels: Vec<DiseaseId> = queries
            .iter()
            .map(|q| q.label.expect("generated queries are labelled"))
            .collect();
        for (pi, &prior) in config.mean_priors.iter().enumerate() {
            let scrambled;
            let cell_net = match prior {
                PriorSetting::True => net,
                PriorSetting::Mean(mean) => {
                    let s = ScrambleSpec {
                        mean_prior: mean,
                        m: config.bates_m,
                        seed: derive_seed(config.seed, PRIOR_TAG + pi as u64),
                    };
                    scrambled = scramble_priors(net, &s)?;
                    &scrambled
                }
            };
            for algo in &config.algorithms {
                let hc = algo.with_n(config.n_variational);
                let (rankings, failures) = rank_queries(cell_net, &queries, &hc, 3)?;
                let (algorithm, solver, ordering) = columns(algo);
                rows.push(AccuracyRow {
                    mode: mode.name().into(),
                    mean_prior: prior.to_string(),
                    algorithm,
                    solver,
                    ordering,
                    n_variational: hc.n_variational,
                    top1_accuracy: top_k_accuracy(&rankings, &labels, 1)?,
                    top3_accuracy: top_k_accuracy(&rankings, &labels, 3)?,
                    n_queries: queries.len(),
                    failures,
                });
            }
        }
    }
    Ok(rows)
}

/// Writes serializable rows as CSV with a header line.
pub fn write_csv<T: Serialize>(w: impl Write, rows: &[T]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}
