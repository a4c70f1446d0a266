//! Exact inference: brute-force enumeration and Quickscore.
//!
//! Quickscore evaluates
//!
//! ```text
//! P(F+, F-) = Σ_{F' ⊆ F+} (-1)^{|F'|} Π_{f ∈ F- ∪ F'} (1 - leak_f)
//!             Π_i [ Π_{f ∈ F- ∪ F'} P(f- | d_i+) · P(d_i+) + P(d_i-) ]
//! ```
//!
//! Diseases that only touch `F-` contribute the same factor to every term and
//! are hoisted out of the subset loop. The loop itself is a depth-first walk
//! over include/exclude decisions. A disease factor is multiplied in at the
//! depth of the last positive finding that touches it, and subtree sums carry
//! the rest, so a node costs only the diseases that become final there.
//! Posterior numerators use leave-one-out products and never divide. When the
//! signed terms cancel badly the walk is repeated in double-double arithmetic.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Div, Mul, Neg};

use crate::error::{Error, Result};
use crate::math::{self, DoubleDouble};
use crate::model::{DiseaseId, NoisyOrNetwork, Query, SymptomId};

pub const BRUTE_FORCE_MAX_DISEASES: usize = 25;
pub const QUICKSCORE_MAX_POSITIVES: usize = 20;

/// Evidence probability plus accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceValue {
    pub value: f64,
    /// Signed terms (Quickscore) or joint states (brute force) evaluated.
    pub terms: u64,
    /// `max |term| / |Σ terms|`; large values flag cancellation in the
    /// inclusion-exclusion sum. 1 for brute force.
    pub term_ratio: f64,
}

/// Evidence together with per-disease posteriors `P(d_i+ | F)`, indexed by
/// [`DiseaseId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPosteriors {
    pub evidence: EvidenceValue,
    pub posteriors: Vec<f64>,
}

fn check_brute(net: &NoisyOrNetwork, query: &Query) -> Result<()> {
    query.validate(net)?;
    if net.n_diseases() > BRUTE_FORCE_MAX_DISEASES {
        return Err(Error::TooManyDiseases {
            limit: BRUTE_FORCE_MAX_DISEASES,
            actual: net.n_diseases(),
        });
    }
    Ok(())
}

/// `P(F | state)` for one joint disease state given as a bitmask.
fn state_likelihood(net: &NoisyOrNetwork, query: &Query, state: u32) -> f64 {
    let absent = |s: SymptomId| -> f64 {
        let mut q = 1.0 - net.leak(s);
        for p in net.parents(s) {
            if state & (1 << p.disease.0) != 0 {
                q *= p.q();
            }
        }
        q
    };
    let mut lik = 1.0;
    for &s in &query.positive {
        lik *= 1.0 - absent(s);
    }
    for &s in &query.negative {
        lik *= absent(s);
    }
    lik
}

/// Sums `P(F|D')P(D')` over all `2^|D|` joint states. Returns `P(F)` and
/// `P(F, d_i+)` for every disease.
fn enumerate(net: &NoisyOrNetwork, query: &Query) -> (f64, Vec<f64>) {
    let nd = net.n_diseases();
    let priors = net.priors();
    let mut total = 0.0;
    let mut joint = vec![0.0; nd];
    for state in 0u32..(1u32 << nd) {
        let mut p_state = 1.0;
        for (i, &prior) in priors.iter().enumerate() {
            p_state *= if state & (1 << i) != 0 {
                prior
            } else {
                1.0 - prior
            };
        }
        let w = p_state * state_likelihood(net, query, state);
        total += w;
        for (i, j) in joint.iter_mut().enumerate() {
            if state & (1 << i) != 0 {
                *j += w;
            }
        }
    }
    (total, joint)
}

/// Exact `P(F+, F-)` by enumerating every disease state. `|D| ≤ 25`.
pub fn brute_force_evidence(net: &NoisyOrNetwork, query: &Query) -> Result<EvidenceValue> {
    check_brute(net, query)?;
    let (total, _) = enumerate(net, query);
    Ok(EvidenceValue {
        value: total,
        terms: 1u64 << net.n_diseases(),
        term_ratio: 1.0,
    })
}

/// Exact `P(d_i+ | F)` by enumeration.
pub fn brute_force_posteriors(net: &NoisyOrNetwork, query: &Query) -> Result<Vec<f64>> {
    check_brute(net, query)?;
    let (total, joint) = enumerate(net, query);
    if !(total > 0.0) {
        return Err(Error::EvidenceImpossible);
    }
    Ok(joint.into_iter().map(|j| j / total).collect())
}

/// Quickscore `P(F+, F-)` under the network priors. `|F+| ≤ 20`.
pub fn quickscore_evidence(net: &NoisyOrNetwork, query: &Query) -> Result<EvidenceValue> {
    query.validate(net)?;
    let priors = net.priors();
    Ok(inclusion_exclusion(net, &query.positive, &query.negative, &priors, false)?.evidence)
}

/// Quickscore evidence and posteriors under the network priors.
pub fn quickscore_posteriors(net: &NoisyOrNetwork, query: &Query) -> Result<ExactPosteriors> {
    query.validate(net)?;
    let priors = net.priors();
    quickscore_with_priors(net, &query.positive, &query.negative, &priors)
}

/// Quickscore posteriors with `P(d_i+)` taken from `priors` instead of the
/// network. This is the exact step of the hybrid schemes, which feed in
/// variationally updated disease probabilities.
pub fn quickscore_with_priors(
    net: &NoisyOrNetwork,
    positives: &[SymptomId],
    negatives: &[SymptomId],
    priors: &[f64],
) -> Result<ExactPosteriors> {
    let out = inclusion_exclusion(net, positives, negatives, priors, true)?;
    match out.posteriors {
        Some(posteriors) => Ok(ExactPosteriors {
            evidence: out.evidence,
            posteriors,
        }),
        None if out.explained => Err(Error::Cancellation),
        None => Err(Error::EvidenceImpossible),
    }
}

/// Quickscore evidence with substituted priors.
pub fn quickscore_evidence_with_priors(
    net: &NoisyOrNetwork,
    positives: &[SymptomId],
    negatives: &[SymptomId],
    priors: &[f64],
) -> Result<EvidenceValue> {
    Ok(inclusion_exclusion(net, positives, negatives, priors, false)?.evidence)
}

struct IeOutput {
    evidence: EvidenceValue,
    /// `None` when posteriors were requested but the evidence is not positive.
    posteriors: Option<Vec<f64>>,
    /// Every positive finding has a possible cause.
    explained: bool,
}

const UNMAPPED: u32 = u32::MAX;

fn inclusion_exclusion(
    net: &NoisyOrNetwork,
    positives: &[SymptomId],
    negatives: &[SymptomId],
    priors: &[f64],
    want_posteriors: bool,
) -> Result<IeOutput> {
    let k = positives.len();
    if k > QUICKSCORE_MAX_POSITIVES {
        return Err(Error::TooManyPositiveFindings {
            limit: QUICKSCORE_MAX_POSITIVES,
            actual: k,
        });
    }
    let terms = 1u64 << k;
    if positives.iter().any(|&s| net.is_unexplainable(s)) {
        let evidence = EvidenceValue {
            value: 0.0,
            terms,
            term_ratio: f64::INFINITY,
        };
        return Ok(IeOutput {
            evidence,
            posteriors: None,
            explained: false,
        });
    }
    let nd = net.n_diseases();

    // Diseases reachable from F+ are the ones whose factor varies across terms.
    let mut local = vec![UNMAPPED; nd];
    let mut relevant: Vec<DiseaseId> = Vec::new();
    for &s in positives {
        for p in net.parents(s) {
            let slot = &mut local[p.disease.index()];
            if *slot == UNMAPPED {
                *slot = relevant.len() as u32;
                relevant.push(p.disease);
            }
        }
    }

    let mut neg_q = vec![1.0; nd];
    let mut neg_touched: Vec<DiseaseId> = Vec::new();
    let mut neg_leak = 1.0;
    for &s in negatives {
        neg_leak *= 1.0 - net.leak(s);
        for p in net.parents(s) {
            let q = &mut neg_q[p.disease.index()];
            if *q == 1.0 && !neg_touched.contains(&p.disease) {
                neg_touched.push(p.disease);
            }
            *q *= p.q();
        }
    }

    let mut posteriors = if want_posteriors {
        Some(priors.to_vec())
    } else {
        None
    };

    // F- only diseases: constant factor, closed-form posterior.
    let mut const_log = 0.0;
    for &d in &neg_touched {
        if local[d.index()] != UNMAPPED {
            continue;
        }
        let a = priors[d.index()];
        let qa = neg_q[d.index()] * a;
        let factor = qa + (1.0 - a);
        const_log += math::ln(factor);
        if let Some(post) = posteriors.as_mut() {
            post[d.index()] = qa / factor;
        }
    }

    // Findings with many parents go first so that most diseases see their
    // last finding early and leave the walk near the root.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&f| (core::cmp::Reverse(net.parents(positives[f]).len()), f));
    let mut last = vec![0usize; relevant.len()];
    for (depth, &f) in order.iter().enumerate() {
        for p in net.parents(positives[f]) {
            last[local[p.disease.index()] as usize] = depth;
        }
    }
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (slot, &depth) in last.iter().enumerate() {
        groups[depth].push(slot as u32);
    }

    let plus: Vec<f64> = relevant.iter().map(|d| priors[d.index()]).collect();
    let minus: Vec<f64> = plus.iter().map(|a| 1.0 - a).collect();
    let finding_parents: Vec<Vec<(u32, f64)>> = order
        .iter()
        .map(|&f| {
            net.parents(positives[f])
                .iter()
                .map(|p| (local[p.disease.index()], p.q()))
                .collect()
        })
        .collect();
    let finding_leak: Vec<f64> = order
        .iter()
        .map(|&f| 1.0 - net.leak(positives[f]))
        .collect();
    let start: Vec<f64> = relevant.iter().map(|d| neg_q[d.index()]).collect();
    let input = WalkInput {
        plus: &plus,
        minus: &minus,
        finding_parents: &finding_parents,
        finding_leak: &finding_leak,
        groups: &groups,
        start: &start,
    };

    let mut walk = input.run::<f64>(want_posteriors);
    let mut term_ratio = walk.term_ratio();
    if term_ratio > ESCALATE_RATIO {
        walk = input.run::<DoubleDouble>(want_posteriors);
        term_ratio = walk.term_ratio();
    }

    let value = math::exp(const_log) * neg_leak * walk.sum;
    let evidence = EvidenceValue {
        value: value.max(0.0),
        terms,
        term_ratio,
    };

    let posteriors = match posteriors {
        Some(mut post) if walk.sum > 0.0 => {
            for (d, ratio) in relevant.iter().zip(walk.ratios) {
                post[d.index()] = ratio.clamp(0.0, 1.0);
            }
            Some(post)
        }
        _ => None,
    };
    Ok(IeOutput {
        evidence,
        posteriors,
        explained: true,
    })
}

/// Above this `max |term| / |Σ terms|` the subset walk is repeated in
/// double-double arithmetic. An f64 walk still keeps about ten digits here.
const ESCALATE_RATIO: f64 = 1e5;

/// Arithmetic the subset walk runs in.
trait Real:
    Copy
    + From<f64>
    + Into<f64>
    + Add<Output = Self>
    + Add<f64, Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
}

impl Real for f64 {}
impl Real for DoubleDouble {}

/// The subset walk over `F+` in its chosen order. Disease factors enter at
/// the depth of the last finding that touches them, so a node only pays for
/// the diseases that become final there.
struct WalkInput<'a> {
    plus: &'a [f64],
    minus: &'a [f64],
    finding_parents: &'a [Vec<(u32, f64)>],
    finding_leak: &'a [f64],
    /// `groups[depth]`: diseases whose last finding is at `depth`.
    groups: &'a [Vec<u32>],
    /// `Π_{f ∈ F-} P(f-|d+)` for the relevant diseases.
    start: &'a [f64],
}

struct WalkOutput {
    sum: f64,
    max_abs: f64,
    /// `P(F, d_i+) / P(F)` per relevant disease; empty unless requested or
    /// when the sum is not positive.
    ratios: Vec<f64>,
}

impl WalkOutput {
    fn term_ratio(&self) -> f64 {
        if self.sum != 0.0 {
            self.max_abs / self.sum.abs()
        } else {
            f64::INFINITY
        }
    }
}

impl WalkInput<'_> {
    fn run<R: Real>(&self, want_posteriors: bool) -> WalkOutput {
        let width = self.start.len();
        let zero = R::from(0.0);
        // Each disease sits in exactly one group, so groups can share one
        // slab laid out group after group.
        let mut offsets = Vec::with_capacity(self.groups.len());
        let mut at = 0;
        for g in self.groups {
            offsets.push(at);
            at += g.len();
        }
        let mut walk = SubsetWalk {
            input: self,
            offsets,
            q: self.start.iter().map(|&q| R::from(q)).collect(),
            saved: Vec::new(),
            factors: vec![zero; width],
            suffix: if want_posteriors {
                vec![zero; width]
            } else {
                Vec::new()
            },
            numerators: if want_posteriors {
                vec![zero; width]
            } else {
                Vec::new()
            },
            want_posteriors,
            max_abs: 0.0,
        };
        let total = walk.visit(0, R::from(1.0), R::from(1.0));
        let sum: f64 = total.into();
        let ratios = if want_posteriors && sum > 0.0 {
            walk.numerators
                .iter()
                .map(|&n| (n / total).into())
                .collect()
        } else {
            Vec::new()
        };
        WalkOutput {
            sum,
            max_abs: walk.max_abs,
            ratios,
        }
    }
}

struct SubsetWalk<'a, R> {
    input: &'a WalkInput<'a>,
    offsets: Vec<usize>,
    /// Current `Π_{f ∈ F- ∪ F'} P(f-|d+)` per relevant disease.
    q: Vec<R>,
    /// Values overwritten by included findings, restored on the way back.
    saved: Vec<R>,
    factors: Vec<R>,
    suffix: Vec<R>,
    numerators: Vec<R>,
    want_posteriors: bool,
    max_abs: f64,
}

impl<R: Real> SubsetWalk<'_, R> {
    /// Sum over the subtree below `depth` of the signed coefficient times
    /// the factors of diseases that become final at or below `depth`.
    /// `outer` is the product of the factors already final above.
    fn visit(&mut self, depth: usize, coef: R, outer: R) -> R {
        let input = self.input;
        if depth == input.finding_parents.len() {
            self.max_abs = self.max_abs.max((coef * outer).into().abs());
            return coef;
        }
        let excluded = self.branch(depth, coef, outer);

        let parents = &input.finding_parents[depth];
        let mark = self.saved.len();
        for &(slot, q) in parents {
            let slot = slot as usize;
            self.saved.push(self.q[slot]);
            self.q[slot] = self.q[slot] * q;
        }
        let included = self.branch(depth, -coef * input.finding_leak[depth], outer);
        for (&(slot, _), &old) in parents.iter().zip(&self.saved[mark..]) {
            self.q[slot as usize] = old;
        }
        self.saved.truncate(mark);
        excluded + included
    }

    /// One child of the node at `depth`, after the finding there is decided.
    fn branch(&mut self, depth: usize, coef: R, outer: R) -> R {
        let input = self.input;
        let group = &input.groups[depth];
        let base = self.offsets[depth];
        let mut g = R::from(1.0);
        for (n, &slot) in group.iter().enumerate() {
            let slot = slot as usize;
            let f = self.q[slot] * input.plus[slot] + input.minus[slot];
            self.factors[base + n] = f;
            g = g * f;
        }
        let below = self.visit(depth + 1, coef, outer * g);
        if self.want_posteriors && !group.is_empty() {
            // Leave-one-out products within the group, without division.
            let mut right = R::from(1.0);
            for n in (0..group.len()).rev() {
                self.suffix[base + n] = right;
                right = right * self.factors[base + n];
            }
            let shared = outer * below;
            let mut left = R::from(1.0);
            for (n, &slot) in group.iter().enumerate() {
                let slot = slot as usize;
                let present = self.q[slot] * input.plus[slot];
                self.numerators[slot] =
                    self.numerators[slot] + shared * (left * self.suffix[base + n]) * present;
                left = left * self.factors[base + n];
            }
        }
        g * below
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkBuilder;

    fn net_n1() -> NoisyOrNetwork {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "d", 0.1).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.5).unwrap();
        b.build().unwrap()
    }

    fn net_n2() -> NoisyOrNetwork {
        let mut b = NetworkBuilder::new();
        b.add_disease(1, "d1", 0.1).unwrap();
        b.add_disease(2, "d2", 0.2).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 1, 0.5).unwrap();
        b.add_edge(0, 2, 0.5).unwrap();
        b.build().unwrap()
    }

    const F: SymptomId = SymptomId(0);

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn brute_force_small_nets() {
        let n1 = net_n1();
        let pos = Query::new([F], [], None);
        let neg = Query::new([], [F], None);
        assert!(close(
            brute_force_evidence(&n1, &pos).unwrap().value,
            0.05,
            1e-12
        ));
        assert!(close(
            brute_force_evidence(&n1, &neg).unwrap().value,
            0.95,
            1e-12
        ));
        assert_eq!(
            brute_force_evidence(&n1, &Query::default()).unwrap().value,
            1.0
        );

        assert!(close(
            brute_force_posteriors(&n1, &pos).unwrap()[0],
            1.0,
            1e-12
        ));
        assert!(close(
            brute_force_posteriors(&n1, &Query::default()).unwrap()[0],
            0.1,
            1e-12
        ));

        let n2 = net_n2();
        let post = brute_force_posteriors(&n2, &pos).unwrap();
        assert!(close(post[0], 0.055 / 0.145, 1e-12));
        assert!(close(post[0], 0.379310, 1e-6));
        assert!(close(post[1], 0.105 / 0.145, 1e-12));
    }

    #[test]
    fn quickscore_matches_enumeration_values() {
        let n1 = net_n1();
        let n2 = net_n2();
        let pos = Query::new([F], [], None);
        let neg = Query::new([], [F], None);
        let e = quickscore_evidence(&n1, &pos).unwrap();
        assert!(close(e.value, 0.05, 1e-12));
        assert_eq!(e.terms, 2);
        assert!(close(
            quickscore_evidence(&n2, &pos).unwrap().value,
            0.145,
            1e-12
        ));
        assert!(close(
            quickscore_evidence(&n2, &neg).unwrap().value,
            0.855,
            1e-12
        ));

        let post = quickscore_posteriors(&n2, &pos).unwrap().posteriors;
        assert!(close(post[0], 0.055 / 0.145, 1e-9));
        assert!(close(post[1], 0.105 / 0.145, 1e-9));
        assert!(close(
            quickscore_posteriors(&n1, &pos).unwrap().posteriors[0],
            1.0,
            1e-12
        ));
        assert_eq!(
            quickscore_posteriors(&n2, &Query::default())
                .unwrap()
                .posteriors,
            n2.priors()
        );
    }

    #[test]
    fn leak_enters_both_routes() {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "d", 0.3).unwrap();
        b.add_symptom(0, "f", 0.2).unwrap();
        b.add_symptom(1, "g", 0.1).unwrap();
        b.add_edge(0, 0, 0.6).unwrap();
        let net = b.build().unwrap();
        // g has no parent but a leak, so observing it positive is possible.
        let q = Query::new([SymptomId(0), SymptomId(1)], [], None);
        let brute = brute_force_evidence(&net, &q).unwrap().value;
        let expected = (0.3 * (1.0 - 0.8 * 0.4) + 0.7 * 0.2) * 0.1;
        assert!(close(brute, expected, 1e-12));
        assert!(close(
            quickscore_evidence(&net, &q).unwrap().value,
            brute,
            1e-12
        ));
        let bp = brute_force_posteriors(&net, &q).unwrap();
        let qp = quickscore_posteriors(&net, &q).unwrap().posteriors;
        assert!(close(qp[0], bp[0], 1e-12));
    }

    #[test]
    fn unexplainable_positive_is_impossible() {
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "d", 0.3).unwrap();
        b.add_symptom(0, "orphan", 0.0).unwrap();
        let net = b.build().unwrap();
        let q = Query::new([SymptomId(0)], [], None);
        assert_eq!(quickscore_evidence(&net, &q).unwrap().value, 0.0);
        assert_eq!(
            quickscore_posteriors(&net, &q),
            Err(Error::EvidenceImpossible)
        );
        assert_eq!(
            brute_force_posteriors(&net, &q),
            Err(Error::EvidenceImpossible)
        );
    }

    #[test]
    fn limits() {
        let mut b = NetworkBuilder::new();
        for i in 0..26 {
            b.add_disease(i, "", 0.1).unwrap();
        }
        for j in 0..21 {
            b.add_symptom(j, "", 0.0).unwrap();
            b.add_edge(j, j, 0.5).unwrap();
        }
        let net = b.build().unwrap();
        let q = Query::positive_only((0..21).map(SymptomId));
        assert!(matches!(
            brute_force_evidence(&net, &q),
            Err(Error::TooManyDiseases { .. })
        ));
        assert!(matches!(
            quickscore_evidence(&net, &q),
            Err(Error::TooManyPositiveFindings { .. })
        ));
    }

    #[test]
    fn tiny_factor_keeps_posteriors_exact() {
        // Disease a is certain and nearly ruled out by 19 negatives, so its
        // factor is far below anything safe to divide by.
        let mut b = NetworkBuilder::new();
        b.add_disease(0, "a", 0.5).unwrap();
        b.add_disease(1, "b", 0.5).unwrap();
        b.add_symptom(0, "f", 0.0).unwrap();
        b.add_edge(0, 0, 0.5).unwrap();
        b.add_edge(0, 1, 0.5).unwrap();
        let almost = 1.0 - f64::EPSILON / 2.0;
        for j in 1..20 {
            b.add_symptom(j, "g", 0.0).unwrap();
            b.add_edge(j, 0, almost).unwrap();
        }
        let net = b.build().unwrap();
        let negatives: Vec<SymptomId> = (1..20).map(SymptomId).collect();
        let out = quickscore_with_priors(&net, &[SymptomId(0)], &negatives, &[1.0, 0.5]).unwrap();
        assert!(out.evidence.value > 0.0 && out.evidence.value < 1e-300);
        assert!(close(out.posteriors[0], 1.0, 1e-12));
        assert!(close(out.posteriors[1], 0.6, 1e-12));
    }
}
