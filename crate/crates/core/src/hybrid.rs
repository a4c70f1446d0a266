//! Hybrid exact/variational inference.
//!
//! `F+` is split into `F1+` (transformed variationally) and `F2+` (kept
//! exact). Three schemes combine the two parts:
//!
//! * **JJ99**: exact step on `(F2+, F-)` first, then `Ξ` solved against the
//!   resulting posterior odds. Those solves depend on the query and are never
//!   cached.
//! * **VFH**: `Ξ` solved against prior odds (cacheable), the priors tilted by
//!   `F1+`, then Quickscore on `(F2+, F-)` under the tilted priors.
//! * **JH**: the `e^{ξθ}` factors carried inside every inclusion-exclusion
//!   term with the `e^{-Σ f*}` prefactor in front. Normalizing each disease
//!   factor by `e^{s_i} P(d_i+) + P(d_i-)` turns the sum into Quickscore under
//!   tilted priors, which is how it is evaluated here.
//!
//! Which findings go to `F1+` is decided by an ordering: FDO (ascending parent
//! count, graph-only) or GDO (greedy on the variational bound).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::{brute_force_evidence, brute_force_posteriors, quickscore_with_priors};
use crate::math;
use crate::model::{DiseaseId, NoisyOrNetwork, Query, SymptomId};
use crate::variational::{
    exponents, log_bound, log_variational_evidence, prior_xi, solve_xi, tilt, OddsSource, Solver,
    XiAssignment, XiCache, XiSolveProblem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Brute,
    Quickscore,
    Jj99,
    Vfh,
    Jh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformOrder {
    /// Greedy bound-driven order.
    Gdo,
    /// Finding-degree order.
    Fdo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HybridConfig {
    pub algorithm: Algorithm,
    pub solver: Solver,
    pub ordering: TransformOrder,
    pub n_variational: usize,
}

impl HybridConfig {
    pub fn quickscore() -> Self {
        HybridConfig {
            algorithm: Algorithm::Quickscore,
            solver: Solver::Cvx,
            ordering: TransformOrder::Fdo,
            n_variational: 0,
        }
    }

    pub fn new(
        algorithm: Algorithm,
        solver: Solver,
        ordering: TransformOrder,
        n_variational: usize,
    ) -> Self {
        HybridConfig {
            algorithm,
            solver,
            ordering,
            n_variational,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub f1: Vec<SymptomId>,
    pub f2: Vec<SymptomId>,
    pub ordering: TransformOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub xi_solves: u64,
    pub cache_hits: u64,
    pub exact_terms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    /// Joint probability of all findings; a variational bound when `F1+ ≠ ∅`.
    pub evidence: f64,
    /// `P(d_i+ | F)` indexed by [`DiseaseId`].
    pub posteriors: Vec<f64>,
    pub counters: Counters,
    pub partition: Option<Partition>,
}

/// Hooks around the variational-parameter step, for timing.
pub trait StageProbe {
    fn variational_begin(&mut self) {}
    fn variational_end(&mut self) {}
}

impl StageProbe for () {}

/// Sorts `F+` by ascending `|π(f)|`, ties by ascending symptom id.
pub fn order_fdo(net: &NoisyOrNetwork, positives: &[SymptomId]) -> Vec<SymptomId> {
    let mut out = positives.to_vec();
    out.sort_by_key(|&s| (net.parents(s).len(), s));
    out
}

/// Reverse-greedy order on the variational bound.
///
/// Starting from every finding transformed, repeatedly moves to the exact
/// side the finding whose removal leaves the smallest bound on the remaining
/// transformed set. The last finding removed is transformed first.
pub fn order_gdo(
    net: &NoisyOrNetwork,
    positives: &[SymptomId],
    solver: Solver,
    cache: &mut XiCache,
) -> Result<Vec<SymptomId>> {
    if positives.len() <= 1 {
        return Ok(positives.to_vec());
    }
    let mut remaining = positives.to_vec();
    remaining.sort_unstable();
    let xi = prior_xi(net, &remaining, solver, cache)?;
    let mut removed = Vec::with_capacity(remaining.len());
    let mut scratch = Vec::with_capacity(remaining.len());
    while remaining.len() > 1 {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..remaining.len() {
            scratch.clear();
            scratch.extend(
                remaining
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != k)
                    .map(|(_, &s)| s),
            );
            let bound = log_variational_evidence(net, &scratch, &xi)?;
            if best.is_none_or(|(_, b)| bound < b) {
                best = Some((k, bound));
            }
        }
        let (k, _) = best.expect("at least two candidates");
        removed.push(remaining.remove(k));
    }
    removed.extend(remaining);
    removed.reverse();
    Ok(removed)
}

/// Splits `F+` into the first `n` findings of the chosen order and the rest.
pub fn partition(
    net: &NoisyOrNetwork,
    positives: &[SymptomId],
    n: usize,
    ordering: TransformOrder,
    solver: Solver,
    cache: &mut XiCache,
) -> Result<Partition> {
    if n > positives.len() {
        return Err(Error::BadN {
            n,
            positives: positives.len(),
        });
    }
    if n == 0 {
        return Ok(Partition {
            f1: Vec::new(),
            f2: positives.to_vec(),
            ordering,
        });
    }
    let mut order = match ordering {
        TransformOrder::Fdo => order_fdo(net, positives),
        TransformOrder::Gdo => order_gdo(net, positives, solver, cache)?,
    };
    let f2 = order.split_off(n);
    Ok(Partition {
        f1: order,
        f2,
        ordering,
    })
}

fn check_query(net: &NoisyOrNetwork, query: &Query) -> Result<()> {
    query.validate(net)?;
    if query.positive.iter().any(|&s| net.is_unexplainable(s)) {
        return Err(Error::EvidenceImpossible);
    }
    Ok(())
}

/// Runs the configured algorithm on one query.
pub fn infer(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
) -> Result<InferenceResult> {
    infer_with_probe(net, query, config, cache, &mut ())
}

pub fn infer_with_probe(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
    probe: &mut impl StageProbe,
) -> Result<InferenceResult> {
    match config.algorithm {
        Algorithm::Brute => infer_brute(net, query),
        Algorithm::Quickscore => {
            let cfg = HybridConfig {
                n_variational: 0,
                ..*config
            };
            infer_vfh_with_probe(net, query, &cfg, cache, probe)
        }
        Algorithm::Jj99 => infer_jj99_with_probe(net, query, config, cache, probe),
        Algorithm::Vfh => infer_vfh_with_probe(net, query, config, cache, probe),
        Algorithm::Jh => infer_jh_with_probe(net, query, config, cache, probe),
    }
}

fn infer_brute(net: &NoisyOrNetwork, query: &Query) -> Result<InferenceResult> {
    let evidence = brute_force_evidence(net, query)?;
    let posteriors = brute_force_posteriors(net, query)?;
    Ok(InferenceResult {
        evidence: evidence.value,
        posteriors,
        counters: Counters {
            exact_terms: evidence.terms,
            ..Counters::default()
        },
        partition: None,
    })
}

struct CacheMark {
    solves: u64,
    hits: u64,
}

impl CacheMark {
    fn new(cache: &XiCache) -> Self {
        CacheMark {
            solves: cache.solves(),
            hits: cache.hits(),
        }
    }

    fn counters(&self, cache: &XiCache, extra_solves: u64, exact_terms: u64) -> Counters {
        Counters {
            xi_solves: cache.solves() - self.solves + extra_solves,
            cache_hits: cache.hits() - self.hits,
            exact_terms,
        }
    }
}

/// JJ99: exact step first, `Ξ` against the exact posterior odds.
pub fn infer_jj99(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
) -> Result<InferenceResult> {
    infer_jj99_with_probe(net, query, config, cache, &mut ())
}

pub fn infer_jj99_with_probe(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
    probe: &mut impl StageProbe,
) -> Result<InferenceResult> {
    check_query(net, query)?;
    let mark = CacheMark::new(cache);
    let part = partition(
        net,
        &query.positive,
        config.n_variational,
        config.ordering,
        config.solver,
        cache,
    )?;
    let exact = quickscore_with_priors(net, &part.f2, &query.negative, &net.priors())?;

    probe.variational_begin();
    let mut direct_solves = 0;
    let xi = match config.solver {
        Solver::Cvx => {
            let mut entries = Vec::with_capacity(part.f1.len());
            for &s in &part.f1 {
                let problem = XiSolveProblem::from_posteriors(net, s, &exact.posteriors);
                entries.push((s, solve_xi(&problem, Solver::Cvx)?));
                direct_solves += 1;
            }
            XiAssignment::new(entries, Solver::Cvx, OddsSource::Posterior)
        }
        Solver::Ppf => prior_xi(net, &part.f1, Solver::Ppf, cache),
    };
    probe.variational_end();
    let xi = xi?;

    let ex = exponents(net, &part.f1, &xi)?;
    let mut posteriors = exact.posteriors;
    let log_var = log_bound(net, &ex, Some(&posteriors));
    for &(d, s) in &ex.per_disease {
        posteriors[d.index()] = tilt(posteriors[d.index()], s);
    }
    Ok(InferenceResult {
        evidence: exact.evidence.value * math::exp(log_var),
        posteriors,
        counters: mark.counters(cache, direct_solves, exact.evidence.terms),
        partition: Some(part),
    })
}

/// Variational-first hybridization.
pub fn infer_vfh(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
) -> Result<InferenceResult> {
    infer_vfh_with_probe(net, query, config, cache, &mut ())
}

pub fn infer_vfh_with_probe(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
    probe: &mut impl StageProbe,
) -> Result<InferenceResult> {
    check_query(net, query)?;
    let mark = CacheMark::new(cache);
    let part = partition(
        net,
        &query.positive,
        config.n_variational,
        config.ordering,
        config.solver,
        cache,
    )?;

    probe.variational_begin();
    let xi = prior_xi(net, &part.f1, config.solver, cache);
    probe.variational_end();
    let xi = xi?;

    let ex = exponents(net, &part.f1, &xi)?;
    let log_var = log_bound(net, &ex, None);
    let mut updated = net.priors();
    for &(d, s) in &ex.per_disease {
        updated[d.index()] = tilt(updated[d.index()], s);
    }
    let exact = quickscore_with_priors(net, &part.f2, &query.negative, &updated)?;
    Ok(InferenceResult {
        evidence: math::exp(log_var) * exact.evidence.value,
        posteriors: exact.posteriors,
        counters: mark.counters(cache, 0, exact.evidence.terms),
        partition: Some(part),
    })
}

/// Joint hybridization.
pub fn infer_jh(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
) -> Result<InferenceResult> {
    infer_jh_with_probe(net, query, config, cache, &mut ())
}

pub fn infer_jh_with_probe(
    net: &NoisyOrNetwork,
    query: &Query,
    config: &HybridConfig,
    cache: &mut XiCache,
    probe: &mut impl StageProbe,
) -> Result<InferenceResult> {
    check_query(net, query)?;
    let mark = CacheMark::new(cache);
    let part = partition(
        net,
        &query.positive,
        config.n_variational,
        config.ordering,
        config.solver,
        cache,
    )?;

    probe.variational_begin();
    let xi = prior_xi(net, &part.f1, config.solver, cache);
    probe.variational_end();
    let xi = xi?;

    // Disease i's factor inside each term is Q_i e^{s_i} P(d_i+) + P(d_i-).
    // Dividing by its F'-independent mass m_i = e^{s_i} P(d_i+) + P(d_i-)
    // leaves a probability-weighted factor; Σ ln m_i joins the prefactor.
    let ex = exponents(net, &part.f1, &xi)?;
    let mut weights = net.priors();
    let mut log_prefactor = ex.log_prefactor;
    for &(d, s) in &ex.per_disease {
        let prior = weights[d.index()];
        let present = s + math::ln(prior);
        let absent = math::ln_1p(-prior);
        let log_mass = crate::math::log_add_exp(present, absent);
        log_prefactor += log_mass;
        weights[d.index()] = math::exp(present - log_mass);
    }
    let exact = quickscore_with_priors(net, &part.f2, &query.negative, &weights)?;
    Ok(InferenceResult {
        evidence: math::exp(log_prefactor) * exact.evidence.value,
        posteriors: exact.posteriors,
        counters: mark.counters(cache, 0, exact.evidence.terms),
        partition: Some(part),
    })
}

/// Top-`k` diseases by posterior, ties by ascending id.
pub fn rank_diseases(result: &InferenceResult, k: usize) -> Vec<DiseaseId> {
    rank_posteriors(&result.posteriors, k)
}

pub fn rank_posteriors(posteriors: &[f64], k: usize) -> Vec<DiseaseId> {
    let mut ids: Vec<u32> = (0..posteriors.len() as u32).collect();
    ids.sort_by(|&a, &b| {
        posteriors[b as usize]
            .total_cmp(&posteriors[a as usize])
            .then(a.cmp(&b))
    });
    ids.truncate(k);
    ids.into_iter().map(DiseaseId).collect()
}
