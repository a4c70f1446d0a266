//! Seeded synthetic workloads.
//!
//! * [`gen_network`] / [`NetworkStream`]: random bipartite networks of a
//!   given shape and density, log-uniform priors and edge probabilities.
//! * [`scramble_priors`]: redraws every prior from a Bates (uniform-mean)
//!   distribution to model uncertain disease priors.
//! * [`gen_queries`]: labelled queries with the four false-positive modes.
//! * Analytic helpers for the finding-degree ordering argument.
//!
//! Everything is driven by a `ChaCha8Rng` seeded from a `u64`, so identical
//! specs give identical output on every platform.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{DiseaseId, NetworkBuilder, NoisyOrNetwork, Query, SymptomId};
use crate::variational::XiAssignment;

/// Networks with more edges than this must be streamed with [`NetworkStream`].
pub const MAX_IN_MEMORY_EDGES: u64 = 10_000_000;

/// Default Bates component count.
pub const DEFAULT_BATES_M: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSpec {
    pub n_diseases: u32,
    pub n_symptoms: u32,
    /// Fraction of the `|D|·|S|` pairs that carry an edge.
    pub density: f64,
    pub prior_range: (f64, f64),
    pub edge_prob_range: (f64, f64),
    pub seed: u64,
}

impl NetworkSpec {
    /// Shape of the 665-disease maternal/infant care network.
    pub fn f120_like(seed: u64) -> Self {
        NetworkSpec {
            n_diseases: 665,
            n_symptoms: 1276,
            density: 0.0124,
            prior_range: (1e-4, 0.1),
            edge_prob_range: (0.05, 0.95),
            seed,
        }
    }

    /// Shape of the 40,000-disease scalability network.
    pub fn s1_like(seed: u64) -> Self {
        NetworkSpec {
            n_diseases: 40_000,
            n_symptoms: 12_000,
            density: 0.80,
            prior_range: (1e-4, 0.1),
            edge_prob_range: (0.05, 0.95),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_diseases == 0 || self.n_symptoms == 0 {
            return Err(Error::Spec("network shape must be positive"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Spec("density must lie in (0, 1]"));
        }
        for (lo, hi) in [self.prior_range, self.edge_prob_range] {
            if !(lo > 0.0 && lo <= hi && hi < 1.0) {
                return Err(Error::Spec("ranges must be ordered inside (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn total_pairs(&self) -> u64 {
        self.n_diseases as u64 * self.n_symptoms as u64
    }

    /// `⌈density · |D| · |S|⌉`.
    pub fn target_edges(&self) -> u64 {
        let t = math::ceil(self.density * self.total_pairs() as f64) as u64;
        t.min(self.total_pairs())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let u: f64 = rng.random();
    if lo == hi {
        return lo;
    }
    let x = math::exp(math::ln(lo) + u * (math::ln(hi) - math::ln(lo)));
    x.clamp(lo, hi)
}

/// Lazily generated network: priors up front, then edges in
/// (symptom, disease) order.
///
/// Edges are chosen by selection sampling over all `|D|·|S|` pairs, so the
/// stream needs O(1) memory beyond the priors and yields exactly
/// [`NetworkSpec::target_edges`] edges. [`gen_network`] consumes the same
/// stream, so streamed and in-memory networks are identical.
#[derive(Debug, Clone)]
pub struct NetworkStream {
    spec: NetworkSpec,
    rng: ChaCha8Rng,
    priors: Vec<f64>,
    next_pair: u64,
    remaining: u64,
}

impl NetworkStream {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let priors = (0..spec.n_diseases)
            .map(|_| log_uniform(&mut rng, spec.prior_range))
            .collect();
        Ok(NetworkStream {
            spec,
            rng,
            priors,
            next_pair: 0,
            remaining: spec.target_edges(),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }
}

/// `(symptom index, disease index, P(f+|d+))`.
impl Iterator for NetworkStream {
    type Item = (u32, u32, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let total = self.spec.total_pairs();
        while self.remaining > 0 && self.next_pair < total {
            let t = self.next_pair;
            self.next_pair += 1;
            if self.rng.random_range(0..total - t) < self.remaining {
                self.remaining -= 1;
                let nd = self.spec.n_diseases as u64;
                let p = log_uniform(&mut self.rng, self.spec.edge_prob_range);
                return Some(((t / nd) as u32, (t % nd) as u32, p));
            }
        }
        None
    }
}

pub fn disease_name(i: u32) -> alloc::string::String {
    format!("D{i}")
}

pub fn symptom_name(j: u32) -> alloc::string::String {
    format!("S{j}")
}

/// Builds a synthetic network in memory (at most [`MAX_IN_MEMORY_EDGES`]).
pub fn gen_network(spec: &NetworkSpec) -> Result<NoisyOrNetwork> {
    spec.validate()?;
    let edges = spec.target_edges();
    if edges > MAX_IN_MEMORY_EDGES {
        return Err(Error::Spec(
            "too many edges for an in-memory build; stream it instead",
        ));
    }
    let stream = NetworkStream::new(*spec)?;
    let mut b = NetworkBuilder::with_capacity(
        spec.n_diseases as usize,
        spec.n_symptoms as usize,
        edges as usize,
    );
    for (i, &p) in stream.priors().iter().enumerate() {
        b.add_disease(i as i64, disease_name(i as u32), p)?;
    }
    for j in 0..spec.n_symptoms {
        b.add_symptom(j as i64, symptom_name(j), 0.0)?;
    }
    for (s, d, p) in stream {
        b.push_edge(SymptomId(s), DiseaseId(d), p)?;
    }
    b.build()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrambleSpec {
    /// Mean of the redrawn priors, in (0, 0.5).
    pub mean_prior: f64,
    /// Bates component count.
    pub m: u32,
    pub seed: u64,
}

impl ScrambleSpec {
    pub fn new(mean_prior: f64, seed: u64) -> Self {
        ScrambleSpec {
            mean_prior,
            m: DEFAULT_BATES_M,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_prior > 0.0 && 2.0 * self.mean_prior < 1.0) {
            return Err(Error::Spec("mean prior must lie in (0, 0.5)"));
        }
        if self.m == 0 {
            return Err(Error::Spec("Bates component count must be at least 1"));
        }
        Ok(())
    }

    /// Variance of one draw: `(2·mean)² / (12 m)`.
    pub fn variance(&self) -> f64 {
        let w = 2.0 * self.mean_prior;
        w * w / (12.0 * self.m as f64)
    }
}

/// Draws from the Bates distribution: the mean of `m` iid `Uniform(0, 2·mean)`.
/// Uniform draws of exactly zero are redrawn.
#[derive(Debug, Clone)]
pub struct BatesSampler {
    width: f64,
    m: u32,
}

impl BatesSampler {
    pub fn new(spec: &ScrambleSpec) -> Result<Self> {
        spec.validate()?;
        Ok(BatesSampler {
            width: 2.0 * spec.mean_prior,
            m: spec.m,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut total = 0.0;
        for _ in 0..self.m {
            let u = loop {
                let u = rng.random_range(0.0..self.width);
                if u > 0.0 {
                    break u;
                }
            };
            total += u;
        }
        total / self.m as f64
    }
}

/// Redraws every prior from the Bates distribution; the graph is untouched.
pub fn scramble_priors(net: &NoisyOrNetwork, spec: &ScrambleSpec) -> Result<NoisyOrNetwork> {
    let sampler = BatesSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let priors: Vec<f64> = (0..net.n_diseases())
        .map(|_| sampler.sample(&mut rng))
        .collect();
    net.with_priors(&priors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryMode {
    /// 20% of `F+` are random symptoms not caused by the label.
    Random20,
    /// 20% of `F+` are symptoms of common chronic diseases.
    Chronic20,
    /// As `Chronic20` at 40%.
    Chronic40,
    /// 20% of `F+` are symptoms of the disease most similar to the label.
    Confuse20,
    /// Every positive finding is a child of the label.
    Clean,
}

impl QueryMode {
    pub const FALSE_POSITIVE_MODES: [QueryMode; 4] = [
        QueryMode::Random20,
        QueryMode::Chronic20,
        QueryMode::Chronic40,
        QueryMode::Confuse20,
    ];

    pub fn false_fraction(self) -> f64 {
        match self {
            QueryMode::Random20 | QueryMode::Chronic20 | QueryMode::Confuse20 => 0.2,
            QueryMode::Chronic40 => 0.4,
            QueryMode::Clean => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryMode::Random20 => "random20",
            QueryMode::Chronic20 => "chronic20",
            QueryMode::Chronic40 => "chronic40",
            QueryMode::Confuse20 => "confuse20",
            QueryMode::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySpec {
    pub mode: QueryMode,
    pub count: usize,
    pub avg_positive: f64,
    pub avg_negative: f64,
    pub seed: u64,
}

impl QuerySpec {
    pub fn new(mode: QueryMode, count: usize, seed: u64) -> Self {
        QuerySpec {
            mode,
            count,
            avg_positive: 8.0,
            avg_negative: 4.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Spec("query count must be positive"));
        }
        if !(self.avg_positive >= 0.0 && self.avg_negative >= 0.0)
            || !self.avg_positive.is_finite()
            || !self.avg_negative.is_finite()
        {
            return Err(Error::Spec(
                "query size averages must be finite and nonnegative",
            ));
        }
        Ok(())
    }
}

/// Fraction of diseases designated chronic (highest priors).
const CHRONIC_FRACTION: f64 = 0.05;
/// Minimum Jaccard overlap for a confuser disease.
const CONFUSER_MIN_OVERLAP: f64 = 0.2;

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as usize
}

/// Diseases with the highest priors, `⌈5% · |D|⌉` of them.
pub fn chronic_diseases(net: &NoisyOrNetwork) -> Vec<DiseaseId> {
    let n = (math::ceil(CHRONIC_FRACTION * net.n_diseases() as f64) as usize).max(1);
    let mut ids: Vec<DiseaseId> = net.disease_ids().collect();
    ids.sort_by(|&a, &b| net.prior(b).total_cmp(&net.prior(a)).then(a.cmp(&b)));
    ids.truncate(n);
    ids.sort();
    ids
}

fn jaccard(a: &[SymptomId], b: &[SymptomId]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Disease sharing the most children with `label` (Jaccard ≥ 0.2), if any.
pub fn most_similar_disease(net: &NoisyOrNetwork, label: DiseaseId) -> Option<DiseaseId> {
    let mine = net.children(label);
    let mut best: Option<(DiseaseId, f64)> = None;
    for d in net.disease_ids().filter(|&d| d != label) {
        let score = jaccard(mine, net.children(d));
        if score >= CONFUSER_MIN_OVERLAP && best.is_none_or(|(_, s)| score > s) {
            best = Some((d, score));
        }
    }
    best.map(|(d, _)| d)
}

fn pick_uniform(rng: &mut ChaCha8Rng, pool: &[SymptomId], amount: usize, out: &mut Vec<SymptomId>) {
    let amount = amount.min(pool.len());
    for k in index::sample(rng, pool.len(), amount) {
        out.push(pool[k]);
    }
}

/// Labelled queries for one false-positive mode.
///
/// Per query: the label is uniform over diseases with children; `|F+|` is
/// Poisson around `avg_positive` (at least 1, at least 2 when false positives
/// are injected so a true positive survives); true positives come from the
/// label's children weighted by `P(f+|d+)`; `⌈fraction · |F+|⌉` false positives
/// come from the mode's pool; negatives are Poisson around `avg_negative`,
/// drawn from symptoms that are not children of the label.
pub fn gen_queries(net: &NoisyOrNetwork, spec: &QuerySpec) -> Result<Vec<Query>> {
    spec.validate()?;
    let eligible: Vec<DiseaseId> = net
        .disease_ids()
        .filter(|&d| !net.children(d).is_empty())
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleLabel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fraction = spec.mode.false_fraction();
    let min_positive = if fraction > 0.0 { 2 } else { 1 };

    let explainable: Vec<SymptomId> = net
        .symptom_ids()
        .filter(|&s| !net.is_unexplainable(s))
        .collect();
    let chronic_pool: Vec<SymptomId> = match spec.mode {
        QueryMode::Chronic20 | QueryMode::Chronic40 => {
            let mut pool: Vec<SymptomId> = chronic_diseases(net)
                .iter()
                .flat_map(|&d| net.children(d).iter().copied())
                .collect();
            pool.sort_unstable();
            pool.dedup();
            pool
        }
        _ => Vec::new(),
    };
    let mut confusers: BTreeMap<DiseaseId, Option<DiseaseId>> = BTreeMap::new();

    let mut queries = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let label = eligible[rng.random_range(0..eligible.len())];
        let children = net.children(label);
        let not_child = |s: &SymptomId| children.binary_search(s).is_err();

        let mut total = poisson(&mut rng, spec.avg_positive).max(min_positive);
        let (n_true, n_false) = loop {
            let n_false = math::ceil(fraction * total as f64) as usize;
            let n_true = total - n_false;
            if n_true <= children.len() || total <= min_positive {
                break (n_true.min(children.len()), n_false);
            }
            total -= 1;
        };

        let mut positive = weighted_children(&mut rng, net, label, n_true);

        if n_false > 0 {
            let random_pool: Vec<SymptomId> =
                explainable.iter().copied().filter(not_child).collect();
            let mode_pool: Vec<SymptomId> = match spec.mode {
                QueryMode::Random20 | QueryMode::Clean => random_pool.clone(),
                QueryMode::Chronic20 | QueryMode::Chronic40 => {
                    chronic_pool.iter().copied().filter(not_child).collect()
                }
                QueryMode::Confuse20 => {
                    let confuser = *confusers
                        .entry(label)
                        .or_insert_with(|| most_similar_disease(net, label));
                    match confuser {
                        Some(c) => net.children(c).iter().copied().filter(not_child).collect(),
                        None => random_pool.clone(),
                    }
                }
            };
            let mut injected = Vec::with_capacity(n_false);
            pick_uniform(&mut rng, &mode_pool, n_false, &mut injected);
            if injected.len() < n_false {
                let rest: Vec<SymptomId> = random_pool
                    .iter()
                    .copied()
                    .filter(|s| !injected.contains(s))
                    .collect();
                let short = n_false - injected.len();
                pick_uniform(&mut rng, &rest, short, &mut injected);
            }
            positive.extend(injected);
        }

        let n_negative = poisson(&mut rng, spec.avg_negative);
        let negative_pool: Vec<SymptomId> = net
            .symptom_ids()
            .filter(|s| not_child(s) && !positive.contains(s))
            .collect();
        let mut negative = Vec::with_capacity(n_negative);
        pick_uniform(&mut rng, &negative_pool, n_negative, &mut negative);

        queries.push(Query::new(positive, negative, Some(label)));
    }
    Ok(queries)
}

/// `amount` distinct children of `label`, drawn sequentially with weight `P(f+|d+)`.
fn weighted_children(
    rng: &mut ChaCha8Rng,
    net: &NoisyOrNetwork,
    label: DiseaseId,
    amount: usize,
) -> Vec<SymptomId> {
    let mut pool: Vec<(SymptomId, f64)> = net
        .children(label)
        .iter()
        .map(|&s| (s, net.edge(s, label).map_or(0.0, |e| e.p)))
        .collect();
    let mut out = Vec::with_capacity(amount);
    for _ in 0..amount.min(pool.len()) {
        let total: f64 = pool.iter().map(|&(_, w)| w).sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (k, &(_, w)) in pool.iter().enumerate() {
            if target < w {
                pick = k;
                break;
            }
            target -= w;
        }
        out.push(pool.swap_remove(pick).0);
    }
    out
}

/// Expected parent count of a finding whose stationary `ξ` is `xi`, for
/// uniform edge weight `c` and inverse prior odds `p`:
/// `(1/c) · ln(1 + 1/ξ) · (p e^c e^{-ξ} + 1)`.
pub fn degree_xi_expectation(xi: f64, p: f64, c: f64) -> Result<f64> {
    if !(xi > 0.0) || !(p >= 0.0) || !(c > 0.0) {
        return Err(Error::Domain("need xi > 0, p >= 0, c > 0"));
    }
    Ok(math::ln_1p(1.0 / xi) * (p * math::exp(c - xi) + 1.0) / c)
}

/// Monte Carlo estimate of `γ = E_i[exp(Σ_{j ∈ F1} ξ_j θ_ji)]` over diseases
/// drawn uniformly with replacement.
pub fn estimate_gamma(
    net: &NoisyOrNetwork,
    f1: &[SymptomId],
    xi: &XiAssignment,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Domain("gamma needs at least one sample"));
    }
    if net.n_diseases() == 0 {
        return Err(Error::Domain("gamma needs at least one disease"));
    }
    let mut weights = Vec::with_capacity(f1.len());
    for &s in f1 {
        weights.push((s, xi.get(s).ok_or(Error::MissingXi(s.0))?));
    }
    if weights.is_empty() {
        return Ok(1.0);
    }
    let weight: Vec<f64> = crate::variational::disease_exponents(net, f1, xi)?
        .into_iter()
        .map(math::exp)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..samples {
        total += weight[rng.random_range(0..weight.len())];
    }
    Ok(total / samples as f64)
}

/// Delta-method variance of `log Q` under Bates-distributed priors:
/// `(1/(3m)) · (1 / (1 + (1 + p)/(γ - 1)))²`.
pub fn predicted_logq_variance(gamma: f64, p: f64, m: u32) -> Result<f64> {
    if !(gamma > 1.0) || !(p >= 0.0) || m == 0 {
        return Err(Error::Domain("need gamma > 1, p >= 0, m >= 1"));
    }
    let r = 1.0 / (1.0 + (1.0 + p) / (gamma - 1.0));
    Ok(r * r / (3.0 * m as f64))
}

/// Exact mean of `exp(Σ_j ξ_j θ_ji)` over all diseases; used to check the
/// Monte Carlo estimator.
pub fn exact_gamma(net: &NoisyOrNetwork, f1: &[SymptomId], xi: &XiAssignment) -> Result<f64> {
    let exponent = crate::variational::disease_exponents(net, f1, xi)?;
    Ok(exponent.iter().map(|&e| math::exp(e)).sum::<f64>() / exponent.len() as f64)
}

/// Uniform edge weight for `P(f+|d+) = p_edge`.
pub fn uniform_theta(p_edge: f64) -> f64 {
    -math::ln_1p(-p_edge)
}

/// Index `k` draws of `0..n` without replacement; exposed for harness code
/// that wants the same sampler as the generators.
pub fn sample_indices(seed: u64, n: usize, k: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    index::sample(&mut rng, n, k.min(n)).into_vec()
}

/// `k` of the symptoms that have at least one parent, uniformly.
pub fn random_findings(net: &NoisyOrNetwork, k: usize, rng: &mut impl Rng) -> Vec<SymptomId> {
    let pool: Vec<SymptomId> = net
        .symptom_ids()
        .filter(|&s| !net.parents(s).is_empty())
        .collect();
    let mut out: Vec<SymptomId> = index::sample(rng, pool.len(), k.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect();
    out.sort_unstable();
    out
}

/// Seeded RNG used throughout the crate, exposed for harness code.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
