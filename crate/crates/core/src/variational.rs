//! Conjugate-dual upper bounds for positive findings.
//!
//! With `f(x) = ln(1 - e^{-x})` and its conjugate
//! `f*(ξ) = -ξ ln ξ + (ξ + 1) ln(ξ + 1)`, every positive finding satisfies
//! `P(f+ | parents) ≤ exp(ξ Σ θ - f*(ξ))` for any `ξ > 0`. Taking the
//! expectation over independent diseases gives the factorized bound
//!
//! ```text
//! P(F1+ | Ξ) = e^{-Σ_j f*(ξ_j)} Π_{i ∈ π(F1+)} [ e^{Σ_j ξ_j θ_ji} P(d_i+) + P(d_i-) ]
//! ```
//!
//! A nonzero leak behaves as an extra parent that is always present, so it
//! contributes `e^{ξ_j θ_leak}` to the bound and a constant term to the gradient.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::EvidenceValue;
use crate::math;
use crate::model::{DiseaseId, NoisyOrNetwork, SymptomId};

/// How a variational parameter was estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Solver {
    /// Newton minimization of the prior-aware single-finding bound.
    Cvx,
    /// Prior/posterior-free closed form `(e^{Σθ} - 1)^{-1}`.
    Ppf,
}

/// Which disease odds enter the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OddsSource {
    Prior,
    Posterior,
}

/// `f(x) = ln(1 - e^{-x})` for `x > 0`.
pub fn conj_f(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain("f(x) needs x > 0"));
    }
    Ok(math::ln(-math::exp_m1(-x)))
}

/// `f*(ξ) = -ξ ln ξ + (ξ + 1) ln(ξ + 1)` for `ξ > 0`.
pub fn conj_dual(xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain("f*(xi) needs xi > 0"));
    }
    Ok(dual(xi))
}

// ξ ln(1 + 1/ξ) + ln(1 + ξ), stable at both ends.
#[inline]
fn dual(xi: f64) -> f64 {
    if xi.is_infinite() {
        return f64::INFINITY;
    }
    xi * math::ln_1p(1.0 / xi) + math::ln_1p(xi)
}

/// PPF estimate `ξ = 1 / (e^x - 1)` for `x = Σ_i θ_ji > 0`.
///
/// This is the point where `f(x) = ξx - f*(ξ)` holds with equality.
pub fn ppf_xi(theta_sum: f64) -> Result<f64> {
    if !(theta_sum > 0.0) {
        return Err(Error::Domain("PPF needs a positive theta sum"));
    }
    Ok(1.0 / math::exp_m1(theta_sum))
}

/// One single-finding minimization: the finding's `θ_ji` and the matching
/// inverse odds `p_i` of each parent.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSolveProblem {
    pub symptom: SymptomId,
    thetas: Vec<f64>,
    odds: Vec<f64>,
}

impl XiSolveProblem {
    pub fn new(symptom: SymptomId, thetas: Vec<f64>, odds: Vec<f64>) -> Result<Self> {
        if thetas.len() != odds.len() {
            return Err(Error::LengthMismatch {
                left: thetas.len(),
                right: odds.len(),
            });
        }
        if thetas.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Domain("theta must be positive and finite"));
        }
        if odds.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain("inverse odds must be nonnegative"));
        }
        Ok(XiSolveProblem {
            symptom,
            thetas,
            odds,
        })
    }

    /// Parents of `s` weighted by their prior odds. A leak enters as an
    /// always-present parent (odds 0).
    pub fn from_priors(net: &NoisyOrNetwork, s: SymptomId) -> Self {
        Self::from_probabilities(net, s, |d| net.prior(d))
    }

    /// Parents of `s` weighted by posterior odds `P(d-|·)/P(d+|·)`.
    pub fn from_posteriors(net: &NoisyOrNetwork, s: SymptomId, posteriors: &[f64]) -> Self {
        Self::from_probabilities(net, s, |d| posteriors[d.index()])
    }

    fn from_probabilities(
        net: &NoisyOrNetwork,
        s: SymptomId,
        prob: impl Fn(DiseaseId) -> f64,
    ) -> Self {
        let parents = net.parents(s);
        let mut thetas = Vec::with_capacity(parents.len() + 1);
        let mut odds = Vec::with_capacity(parents.len() + 1);
        for p in parents {
            let pr = prob(p.disease);
            thetas.push(p.theta);
            odds.push(if pr > 0.0 {
                (1.0 - pr) / pr
            } else {
                f64::INFINITY
            });
        }
        let leak = net.leak_theta(s);
        if leak > 0.0 {
            thetas.push(leak);
            odds.push(0.0);
        }
        XiSolveProblem {
            symptom: s,
            thetas,
            odds,
        }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn odds(&self) -> &[f64] {
        &self.odds
    }

    pub fn theta_sum(&self) -> f64 {
        self.thetas.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn gradient(&self, xi: f64) -> f64 {
        let mut g = -math::ln_1p(1.0 / xi);
        for (&t, &p) in self.thetas.iter().zip(&self.odds) {
            if p == 0.0 {
                g += t;
            } else if p.is_finite() {
                g += t / (p * math::exp(-xi * t) + 1.0);
            }
        }
        g
    }

    fn curvature(&self, xi: f64) -> f64 {
        let mut h = 1.0 / (xi * (1.0 + xi));
        for (&t, &p) in self.thetas.iter().zip(&self.odds) {
            if p > 0.0 && p.is_finite() {
                let e = p * math::exp(-xi * t);
                let den = e + 1.0;
                h += t * t * e / (den * den);
            }
        }
        h
    }
}

/// `∂/∂ξ ln P(f+ | ξ) = ln(ξ / (1 + ξ)) + Σ_i θ_i / (p_i e^{-ξ θ_i} + 1)`.
///
/// Strictly increasing in `ξ`; its root is the CVX estimate.
pub fn bound_gradient(problem: &XiSolveProblem, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain("gradient needs xi > 0"));
    }
    Ok(problem.gradient(xi))
}

/// Second derivative of the single-finding log bound; always positive.
pub fn bound_curvature(problem: &XiSolveProblem, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain("curvature needs xi > 0"));
    }
    Ok(problem.curvature(xi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvxOptions {
    /// Stop once `|gradient| < tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CvxOptions {
    fn default() -> Self {
        CvxOptions {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

const BRACKET_FLOOR: f64 = 1e-12;
const BRACKET_CEILING: f64 = 1e12;

/// Safeguarded Newton for the root of [`bound_gradient`].
///
/// Seeded at the PPF value, which is a lower bound for the root because every
/// odds term only shrinks the gradient. Steps that leave the sign-change
/// bracket fall back to bisection (geometric while the bracket spans more than
/// a factor of four).
pub fn cvx_solve_xi(problem: &XiSolveProblem, opts: CvxOptions) -> Result<f64> {
    if problem.is_empty() {
        return Err(Error::NoParents(problem.symptom.0));
    }
    let seed = ppf_xi(problem.theta_sum())?;
    let mut x = seed;
    let mut g = problem.gradient(x);
    if g.abs() < opts.tol {
        return Ok(x);
    }

    let mut lo = BRACKET_FLOOR.min(seed);
    let mut hi = seed;
    if g < 0.0 {
        lo = seed;
        hi = seed.max(BRACKET_FLOOR);
        loop {
            hi *= 2.0;
            if hi > BRACKET_CEILING {
                return Err(Error::NoConvergence("bracket expansion passed xi = 1e12"));
            }
            if problem.gradient(hi) > 0.0 {
                break;
            }
        }
    } else {
        while problem.gradient(lo) > 0.0 {
            lo *= 0.5;
            if lo < f64::MIN_POSITIVE {
                return Err(Error::NoConvergence("no sign change above zero"));
            }
        }
    }

    for _ in 0..opts.max_iter {
        let h = problem.curvature(x);
        let mut next = x - g / h;
        if !(next > lo && next < hi) {
            next = if hi > 4.0 * lo {
                math::sqrt(lo * hi)
            } else {
                0.5 * (lo + hi)
            };
        }
        x = next;
        g = problem.gradient(x);
        if g.abs() < opts.tol {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            // Root pinned to machine precision.
            return Ok(x);
        }
    }
    Err(Error::NoConvergence("iteration limit reached"))
}

/// Solves a problem with the chosen estimator.
pub fn solve_xi(problem: &XiSolveProblem, solver: Solver) -> Result<f64> {
    match solver {
        Solver::Cvx => cvx_solve_xi(problem, CvxOptions::default()),
        Solver::Ppf => {
            if problem.is_empty() {
                return Err(Error::NoParents(problem.symptom.0));
            }
            ppf_xi(problem.theta_sum())
        }
    }
}

/// Variational parameters for a set of transformed findings.
#[derive(Debug, Clone, PartialEq)]
pub struct XiAssignment {
    entries: Vec<(SymptomId, f64)>,
    pub solver: Solver,
    pub odds: OddsSource,
}

impl XiAssignment {
    pub fn new(
        entries: impl IntoIterator<Item = (SymptomId, f64)>,
        solver: Solver,
        odds: OddsSource,
    ) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().collect();
        if entries.iter().any(|&(_, xi)| !(xi > 0.0)) {
            return Err(Error::Domain("every xi must be positive"));
        }
        entries.sort_by_key(|&(s, _)| s);
        entries.dedup_by_key(|&mut (s, _)| s);
        Ok(XiAssignment {
            entries,
            solver,
            odds,
        })
    }

    pub fn get(&self, s: SymptomId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&s, |&(k, _)| k)
            .ok()
            .map(|k| self.entries[k].1)
    }

    pub fn entries(&self) -> &[(SymptomId, f64)] {
        &self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|&(_, xi)| xi).sum()
    }
}

/// Per-disease exponents `Σ_j ξ_j θ_ji` plus the finding-level constants of
/// the bound.
#[derive(Debug, Clone, Default)]
pub(crate) struct Exponents {
    /// Diseases in `π(F1)` with their exponent, ascending by disease.
    pub per_disease: Vec<(DiseaseId, f64)>,
    /// `Σ_j ξ_j θ_leak_j - Σ_j f*(ξ_j)`.
    pub log_prefactor: f64,
}

pub(crate) fn exponents(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
) -> Result<Exponents> {
    let mut log_prefactor = 0.0;
    let mut touched: BTreeMap<u32, f64> = BTreeMap::new();
    for &s in f1 {
        let x = xi.get(s).ok_or(Error::MissingXi(s.0))?;
        log_prefactor += x * net.leak_theta(s) - dual(x);
        for p in net.parents(s) {
            *touched.entry(p.disease.0).or_insert(0.0) += x * p.theta;
        }
    }
    Ok(Exponents {
        per_disease: touched
            .into_iter()
            .map(|(d, e)| (DiseaseId(d), e))
            .collect(),
        log_prefactor,
    })
}

/// `P(d+)` after multiplying the present branch by `e^s`. Overflow of `e^s`
/// yields the limit 1.
#[inline]
pub(crate) fn tilt(prior: f64, s: f64) -> f64 {
    if prior <= 0.0 {
        return 0.0;
    }
    let odds = (1.0 - prior) / prior;
    1.0 / (1.0 + odds * math::exp(-s))
}

/// `ln(e^s a + (1 - a))`.
#[inline]
pub(crate) fn log_tilt_mass(prior: f64, s: f64) -> f64 {
    let present = if prior > 0.0 {
        s + math::ln(prior)
    } else {
        f64::NEG_INFINITY
    };
    let absent = if prior < 1.0 {
        math::ln_1p(-prior)
    } else {
        f64::NEG_INFINITY
    };
    math::log_add_exp(present, absent)
}

pub(crate) fn log_bound(net: &NoisyOrNetwork, ex: &Exponents, priors: Option<&[f64]>) -> f64 {
    let prior = |d: DiseaseId| priors.map_or_else(|| net.prior(d), |p| p[d.index()]);
    ex.log_prefactor
        + ex.per_disease
            .iter()
            .map(|&(d, s)| log_tilt_mass(prior(d), s))
            .sum::<f64>()
}

/// Variational upper bound `P(F1+ | Ξ)` under the network priors.
pub fn variational_evidence(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
) -> Result<EvidenceValue> {
    let ex = exponents(net, f1, xi)?;
    Ok(EvidenceValue {
        value: math::exp(log_bound(net, &ex, None)),
        terms: 1,
        term_ratio: 1.0,
    })
}

/// Natural log of [`variational_evidence`].
pub fn log_variational_evidence(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
) -> Result<f64> {
    let ex = exponents(net, f1, xi)?;
    Ok(log_bound(net, &ex, None))
}

/// Bound with `P(d_i+)` replaced by `priors[i]` (JJ99 uses exact posteriors).
pub fn log_variational_evidence_with_priors(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
    priors: &[f64],
) -> Result<f64> {
    let ex = exponents(net, f1, xi)?;
    Ok(log_bound(net, &ex, Some(priors)))
}

/// `P(d_i+ | F1+, Ξ)` for every disease; diseases outside `π(F1)` keep their prior.
pub fn variational_posteriors(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
) -> Result<Vec<f64>> {
    variational_posteriors_with_priors(net, f1, xi, &net.priors())
}

pub fn variational_posteriors_with_priors(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
    priors: &[f64],
) -> Result<Vec<f64>> {
    let ex = exponents(net, f1, xi)?;
    let mut out = priors.to_vec();
    for &(d, s) in &ex.per_disease {
        out[d.index()] = tilt(priors[d.index()], s);
    }
    Ok(out)
}

// FNV-1a over the bit patterns.
fn fingerprint(values: impl Iterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// 64-bit fingerprint of the prior odds of `s`'s parents.
pub fn odds_fingerprint(net: &NoisyOrNetwork, s: SymptomId) -> u64 {
    fingerprint(net.parents(s).iter().map(|p| net.prior(p.disease)))
}

/// Memo of prior-odds variational parameters, keyed by symptom, solver and
/// a fingerprint of the parents' priors.
///
/// Lookups take `&mut self`. To share one cache across threads, warm it with
/// [`XiCache::warm`] and hand out [`SealedXiCache`] views.
#[derive(Debug, Clone, Default)]
pub struct XiCache {
    entries: BTreeMap<(u32, Solver, u64), f64>,
    hits: u64,
    solves: u64,
}

impl XiCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(net: &NoisyOrNetwork, s: SymptomId, solver: Solver) -> (u32, Solver, u64) {
        let fp = match solver {
            Solver::Cvx => odds_fingerprint(net, s),
            Solver::Ppf => 0,
        };
        (s.0, solver, fp)
    }

    /// Cached `ξ` for `s`, solving and storing on a miss. Only prior odds
    /// are cacheable.
    pub fn get(
        &mut self,
        net: &NoisyOrNetwork,
        s: SymptomId,
        solver: Solver,
        odds: OddsSource,
    ) -> Result<f64> {
        if odds != OddsSource::Prior {
            return Err(Error::Uncacheable);
        }
        let key = Self::key(net, s, solver);
        if let Some(&xi) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(xi);
        }
        let xi = solve_xi(&XiSolveProblem::from_priors(net, s), solver)?;
        self.solves += 1;
        self.entries.insert(key, xi);
        Ok(xi)
    }

    /// Solves every symptom that has at least one cause.
    pub fn warm(&mut self, net: &NoisyOrNetwork, solver: Solver) -> Result<()> {
        for s in net.symptom_ids() {
            if !net.is_unexplainable(s) {
                let key = Self::key(net, s, solver);
                if !self.entries.contains_key(&key) {
                    let xi = solve_xi(&XiSolveProblem::from_priors(net, s), solver)?;
                    self.solves += 1;
                    self.entries.insert(key, xi);
                }
            }
        }
        Ok(())
    }

    pub fn seal(&self) -> SealedXiCache<'_> {
        SealedXiCache { cache: self }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn solves(&self) -> u64 {
        self.solves
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Read-only view of a warmed cache; `Sync`, never solves.
#[derive(Debug, Clone, Copy)]
pub struct SealedXiCache<'a> {
    cache: &'a XiCache,
}

impl SealedXiCache<'_> {
    pub fn get(&self, net: &NoisyOrNetwork, s: SymptomId, solver: Solver) -> Option<f64> {
        self.cache
            .entries
            .get(&XiCache::key(net, s, solver))
            .copied()
    }
}

/// Variational parameters for `f1` against prior odds, through `cache`.
pub fn prior_xi(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    solver: Solver,
    cache: &mut XiCache,
) -> Result<XiAssignment> {
    let mut entries = Vec::with_capacity(f1.len());
    for &s in f1 {
        entries.push((s, cache.get(net, s, solver, OddsSource::Prior)?));
    }
    XiAssignment::new(entries, solver, OddsSource::Prior)
}

/// Dense scratch used by callers that need `Σ_j ξ_j θ_ji` for every disease.
pub fn disease_exponents(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
) -> Result<Vec<f64>> {
    let ex = exponents(net, f1, xi)?;
    let mut out = vec![0.0; net.n_diseases()];
    for (d, s) in ex.per_disease {
        out[d.index()] = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::brute_force_evidence;
    use crate::model::{NetworkBuilder, Query};

    const LN2: f64 = core::f64::consts::LN_2;

    fn net_n1() -> NoisyOrNetwork {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "d", 0.1).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.5).unwrap();
        b.build().unwrap()
    }

    fn problem(thetas: &[f64], odds: &[f64]) -> XiSolveProblem {
        XiSolveProblem::new(SymptomId(0), thetas.to_vec(), odds.to_vec()).unwrap()
    }

    #[test]
    fn conjugate_pair_values() {
        assert!((conj_f(LN2).unwrap() + LN2).abs() < 1e-15);
        assert!((conj_f(4f64.ln()).unwrap() - 0.75f64.ln()).abs() < 1e-15);
        assert!(conj_f(800.0).unwrap() <= 0.0 && conj_f(800.0).unwrap() > -1e-300);
        assert!(conj_f(0.0).is_err());

        assert!((conj_dual(1.0).unwrap() - 2.0 * LN2).abs() < 1e-15);
        let third = (3f64.ln()) / 3.0 + (4.0 / 3.0) * (4.0f64 / 3.0).ln();
        assert!((conj_dual(1.0 / 3.0).unwrap() - third).abs() < 1e-15);
        assert!((conj_dual(1.0 / 3.0).unwrap() - 0.749780).abs() < 1e-6);
        assert!(conj_dual(1e-300).unwrap() < 1e-290);
        assert!(conj_dual(-1.0).is_err());
    }

    #[test]
    fn ppf_closed_form() {
        assert!((ppf_xi(LN2).unwrap() - 1.0).abs() < 1e-15);
        assert!((ppf_xi(4f64.ln()).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(ppf_xi(0.0).is_err());
        for x in [0.01, 0.1, 1.0, 5.0, 20.0] {
            let xi = ppf_xi(x).unwrap();
            let gap = conj_f(x).unwrap() - (xi * x - conj_dual(xi).unwrap());
            assert!(gap.abs() < 1e-12, "x = {x}: gap {gap}");
        }
    }

    #[test]
    fn gradient_values() {
        assert!(bound_gradient(&problem(&[LN2], &[0.0]), 1.0).unwrap().abs() < 1e-15);
        let g = bound_gradient(&problem(&[LN2], &[9.0]), 1.0).unwrap();
        assert!((g - (-LN2 + LN2 / 5.5)).abs() < 1e-15);
        assert!((g + 0.567120).abs() < 1e-6);
        assert!(bound_gradient(&problem(&[LN2], &[9.0]), 0.0).is_err());
    }

    #[test]
    fn cvx_hand_solvable_and_errors() {
        let xi = cvx_solve_xi(&problem(&[LN2], &[0.0]), CvxOptions::default()).unwrap();
        assert!((xi - 1.0).abs() < 1e-8);
        let p = problem(&[LN2], &[9.0]);
        let xi = cvx_solve_xi(&p, CvxOptions::default()).unwrap();
        assert!(xi > 1.0);
        assert!(bound_gradient(&p, xi).unwrap().abs() < 1e-8);
        assert_eq!(
            cvx_solve_xi(&problem(&[], &[]), CvxOptions::default()),
            Err(Error::NoParents(0))
        );
        // Every parent has posterior 0: the gradient never turns positive.
        let dead = problem(&[LN2], &[f64::INFINITY]);
        assert!(matches!(
            cvx_solve_xi(&dead, CvxOptions::default()),
            Err(Error::NoConvergence(_))
        ));
    }

    #[test]
    fn cvx_extreme_theta_sums() {
        // Huge theta sums push the root far below the nominal 1e-12 floor.
        let p = problem(&[30.0, 30.0, 30.0], &[0.0, 5.0, 50.0]);
        let xi = cvx_solve_xi(&p, CvxOptions::default()).unwrap();
        assert!(bound_gradient(&p, xi).unwrap().abs() < 1e-8);
        // Rare parents with weak edges push it far above 1.
        let p = problem(&[0.01], &[1e4]);
        let xi = cvx_solve_xi(&p, CvxOptions::default()).unwrap();
        assert!(xi > 100.0);
        assert!(bound_gradient(&p, xi).unwrap().abs() < 1e-8);
    }

    #[test]
    fn variational_evidence_n1() {
        let net = net_n1();
        let f = [SymptomId(0)];
        let xi = XiAssignment::new([(SymptomId(0), 1.0)], Solver::Ppf, OddsSource::Prior).unwrap();
        let v = variational_evidence(&net, &f, &xi).unwrap().value;
        assert!((v - 0.275).abs() < 1e-15);
        let exact = brute_force_evidence(&net, &Query::positive_only(f))
            .unwrap()
            .value;
        assert!(v >= exact);
        assert_eq!(variational_evidence(&net, &[], &xi).unwrap().value, 1.0);

        let post = variational_posteriors(&net, &f, &xi).unwrap();
        assert!((post[0] - 0.2 / 1.1).abs() < 1e-15);

        let none = XiAssignment::new([], Solver::Ppf, OddsSource::Prior).unwrap();
        assert_eq!(
            variational_evidence(&net, &f, &none),
            Err(Error::MissingXi(0))
        );
        assert!(XiAssignment::new([(SymptomId(0), 0.0)], Solver::Ppf, OddsSource::Prior).is_err());
    }

    #[test]
    fn posteriors_outside_parent_set_keep_prior() {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "a", 0.1).unwrap();
        b.add_disease(1, "b", 0.37).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.5).unwrap();
        let net = b.build().unwrap();
        let xi = XiAssignment::new([(SymptomId(0), 2.0)], Solver::Cvx, OddsSource::Prior).unwrap();
        let post = variational_posteriors(&net, &[SymptomId(0)], &xi).unwrap();
        assert_eq!(post[1], 0.37);
        // ξ → 0 limit: tilt vanishes.
        let tiny =
            XiAssignment::new([(SymptomId(0), 1e-18)], Solver::Cvx, OddsSource::Prior).unwrap();
        let post = variational_posteriors(&net, &[SymptomId(0)], &tiny).unwrap();
        assert!((post[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn tilt_saturates_to_one() {
        assert_eq!(tilt(1e-6, 1e4), 1.0);
        assert!(log_tilt_mass(0.5, 1e4).is_finite());
    }

    #[test]
    fn cache_hits_are_bit_identical() {
        let net = net_n1();
        let mut cache = XiCache::new();
        let a = cache
            .get(&net, SymptomId(0), Solver::Cvx, OddsSource::Prior)
            .unwrap();
        let b = cache
            .get(&net, SymptomId(0), Solver::Cvx, OddsSource::Prior)
            .unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!((cache.solves(), cache.hits()), (1, 1));
        let fresh = cvx_solve_xi(
            &XiSolveProblem::from_priors(&net, SymptomId(0)),
            CvxOptions::default(),
        )
        .unwrap();
        assert_eq!(a.to_bits(), fresh.to_bits());
        assert_eq!(
            cache.get(&net, SymptomId(0), Solver::Cvx, OddsSource::Posterior),
            Err(Error::Uncacheable)
        );

        let shifted = net.with_priors(&[0.2]).unwrap();
        assert_ne!(
            odds_fingerprint(&net, SymptomId(0)),
            odds_fingerprint(&shifted, SymptomId(0))
        );
        cache
            .get(&shifted, SymptomId(0), Solver::Cvx, OddsSource::Prior)
            .unwrap();
        assert_eq!(cache.solves(), 2);
        assert_eq!(
            cache.seal().get(&shifted, SymptomId(0), Solver::Cvx),
            Some(
                cache
                    .get(&shifted, SymptomId(0), Solver::Cvx, OddsSource::Prior)
                    .unwrap()
            )
        );
    }
}
