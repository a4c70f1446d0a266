use nobn_core::exact::{
    brute_force_evidence, brute_force_posteriors, quickscore_evidence, quickscore_posteriors,
};
use nobn_core::hybrid::{infer, partition, Algorithm, HybridConfig, TransformOrder};
use nobn_core::synth::{gen_network, scramble_priors, NetworkSpec, ScrambleSpec};
use nobn_core::variational::{
    bound_curvature, bound_gradient, cvx_solve_xi, solve_xi, variational_evidence,
    variational_posteriors, CvxOptions, OddsSource, Solver, XiAssignment, XiCache, XiSolveProblem,
};
use nobn_core::{DiseaseId, NetworkBuilder, NoisyOrNetwork, Query, SymptomId};
use proptest::prelude::*;

fn small_net(seed: u64, d: u32, s: u32, density: f64, leak: f64) -> NoisyOrNetwork {
    let spec = NetworkSpec {
        n_diseases: d,
        n_symptoms: s,
        density,
        prior_range: (0.01, 0.5),
        edge_prob_range: (0.05, 0.95),
        seed,
    };
    let net = gen_network(&spec).unwrap();
    if leak == 0.0 {
        return net;
    }
    let mut b = NetworkBuilder::new();
    for x in net.diseases() {
        b.add_disease(x.key, x.name.clone(), x.prior).unwrap();
    }
    for x in net.symptoms() {
        b.add_symptom(x.key, x.name.clone(), leak).unwrap();
    }
    for j in net.symptom_ids() {
        for p in net.parents(j) {
            b.push_edge(j, p.disease, p.p).unwrap();
        }
    }
    b.build().unwrap()
}

/// Direct sum over all disease states, written independently of the library.
fn enumerate(net: &NoisyOrNetwork, q: &Query) -> (f64, Vec<f64>) {
    let n = net.n_diseases();
    let mut total = 0.0;
    let mut present = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let mut w = 1.0;
        for i in 0..n {
            let pi = net.prior(DiseaseId(i as u32));
            w *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        let off = |s: SymptomId| {
            let mut off = 1.0 - net.leak(s);
            for p in net.parents(s) {
                if mask >> p.disease.0 & 1 == 1 {
                    off *= 1.0 - p.p;
                }
            }
            off
        };
        for &s in &q.positive {
            w *= 1.0 - off(s);
        }
        for &s in &q.negative {
            w *= off(s);
        }
        total += w;
        for (i, slot) in present.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *slot += w;
            }
        }
    }
    (total, present.iter().map(|x| x / total).collect())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs() || (a - b).abs() < 1e-300
}

prop_compose! {
    fn net_and_query()(
        seed in any::<u64>(),
        d in 1u32..=10,
        s in 1u32..=12,
        density in 0.05f64..=0.4,
        leak in prop_oneof![Just(0.0), 0.001f64..0.2],
        picks in proptest::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 0..9),
    ) -> (NoisyOrNetwork, Query) {
        let net = small_net(seed, d, s, density, leak);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (ix, positive) in picks {
            let j = SymptomId(ix.index(s as usize) as u32);
            if pos.contains(&j) || neg.contains(&j) {
                continue;
            }
            if positive && pos.len() < 5 && !net.is_unexplainable(j) {
                pos.push(j);
            } else if !positive && neg.len() < 4 {
                neg.push(j);
            }
        }
        (net, Query::new(pos, neg, None))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exact_routes_match_enumeration((net, q) in net_and_query()) {
        let (evidence, post) = enumerate(&net, &q);
        let bf = brute_force_evidence(&net, &q).unwrap().value;
        let qs = quickscore_evidence(&net, &q).unwrap();
        prop_assert!(rel_close(bf, evidence, 1e-9), "brute {bf} vs {evidence}");
        prop_assert!(rel_close(qs.value, evidence, 1e-9), "quickscore {} vs {evidence}", qs.value);
        prop_assert_eq!(qs.terms, 1u64 << q.positive.len());
        prop_assert!(evidence <= 1.0 + 1e-12);
        let bp = brute_force_posteriors(&net, &q).unwrap();
        let qp = quickscore_posteriors(&net, &q).unwrap();
        for i in 0..net.n_diseases() {
            prop_assert!(rel_close(bp[i], post[i], 1e-9));
            prop_assert!(rel_close(qp.posteriors[i], post[i], 1e-9), "d{i}: {} vs {}", qp.posteriors[i], post[i]);
            prop_assert!((0.0..=1.0).contains(&qp.posteriors[i]));
        }
    }

    #[test]
    fn negative_findings_never_raise_evidence((net, q) in net_and_query(), extra in any::<prop::sample::Index>()) {
        let j = SymptomId(extra.index(net.n_symptoms()) as u32);
        prop_assume!(!q.positive.contains(&j) && !q.negative.contains(&j));
        let before = quickscore_evidence(&net, &q).unwrap().value;
        let mut neg = q.negative.clone();
        neg.push(j);
        let after = quickscore_evidence(&net, &Query::new(q.positive.clone(), neg, None)).unwrap().value;
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn bound_dominates_evidence(
        (net, q) in net_and_query(),
        xis in proptest::collection::vec(1e-3f64..50.0, 5),
    ) {
        let f1 = q.positive.clone();
        let exact = brute_force_evidence(&net, &Query::positive_only(f1.clone())).unwrap().value;
        let random = XiAssignment::new(f1.iter().copied().zip(xis), Solver::Cvx, OddsSource::Prior).unwrap();
        prop_assert!(variational_evidence(&net, &f1, &random).unwrap().value >= exact - 1e-12);
        for solver in [Solver::Cvx, Solver::Ppf] {
            let mut cache = XiCache::new();
            let xi = nobn_core::variational::prior_xi(&net, &f1, solver, &mut cache).unwrap();
            prop_assert!(variational_evidence(&net, &f1, &xi).unwrap().value >= exact - 1e-12);
            for p in variational_posteriors(&net, &f1, &xi).unwrap() {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn gradient_increases_and_cvx_finds_root(
        thetas in proptest::collection::vec(0.01f64..5.0, 1..8),
        odds_raw in proptest::collection::vec(0.0f64..1000.0, 8),
        a in 1e-3f64..100.0,
        b in 1e-3f64..100.0,
    ) {
        let odds = odds_raw[..thetas.len()].to_vec();
        let problem = XiSolveProblem::new(SymptomId(0), thetas, odds).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(bound_gradient(&problem, lo).unwrap() < bound_gradient(&problem, hi).unwrap());
        prop_assert!(bound_curvature(&problem, lo).unwrap() > 0.0);
        let xi = cvx_solve_xi(&problem, CvxOptions::default()).unwrap();
        prop_assert!(xi > 0.0);
        prop_assert!(bound_gradient(&problem, xi).unwrap().abs() < 1e-8);
    }

    #[test]
    fn cvx_is_at_least_as_tight_as_ppf((net, q) in net_and_query()) {
        for &s in &q.positive {
            prop_assume!(!net.parents(s).is_empty());
            let problem = XiSolveProblem::from_priors(&net, s);
            let cvx = solve_xi(&problem, Solver::Cvx).unwrap();
            let ppf = solve_xi(&problem, Solver::Ppf).unwrap();
            let at = |x: f64, solver| {
                let xi = XiAssignment::new([(s, x)], solver, OddsSource::Prior).unwrap();
                variational_evidence(&net, &[s], &xi).unwrap().value
            };
            prop_assert!(at(cvx, Solver::Cvx) <= at(ppf, Solver::Ppf) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn hybrids_agree_without_transformed_findings((net, q) in net_and_query()) {
        let mut cache = XiCache::new();
        let base = infer(&net, &q, &HybridConfig::quickscore(), &mut cache).unwrap();
        for algorithm in [Algorithm::Jj99, Algorithm::Vfh, Algorithm::Jh] {
            for ordering in [TransformOrder::Fdo, TransformOrder::Gdo] {
                let cfg = HybridConfig::new(algorithm, Solver::Cvx, ordering, 0);
                let out = infer(&net, &q, &cfg, &mut cache).unwrap();
                prop_assert_eq!(&out.posteriors, &base.posteriors);
                prop_assert_eq!(out.evidence, base.evidence);
            }
        }
    }

    #[test]
    fn hybrid_posteriors_are_probabilities((net, q) in net_and_query(), n in 0usize..3) {
        prop_assume!(n <= q.positive.len());
        let mut cache = XiCache::new();
        for algorithm in [Algorithm::Jj99, Algorithm::Vfh, Algorithm::Jh] {
            for solver in [Solver::Cvx, Solver::Ppf] {
                let cfg = HybridConfig::new(algorithm, solver, TransformOrder::Fdo, n);
                let out = infer(&net, &q, &cfg, &mut cache).unwrap();
                prop_assert!(out.evidence >= 0.0);
                prop_assert!(out.posteriors.iter().all(|p| (0.0..=1.0).contains(p)));
                let part = out.partition.unwrap();
                prop_assert_eq!(part.f1.len(), n);
                prop_assert_eq!(part.f1.len() + part.f2.len(), q.positive.len());
            }
        }
    }

    #[test]
    fn jh_and_vfh_coincide((net, q) in net_and_query(), n in 1usize..3) {
        prop_assume!(n <= q.positive.len());
        let mut cache = XiCache::new();
        let vfh = infer(&net, &q, &HybridConfig::new(Algorithm::Vfh, Solver::Cvx, TransformOrder::Fdo, n), &mut cache).unwrap();
        let jh = infer(&net, &q, &HybridConfig::new(Algorithm::Jh, Solver::Cvx, TransformOrder::Fdo, n), &mut cache).unwrap();
        prop_assert!(rel_close(jh.evidence, vfh.evidence, 1e-9));
        for (a, b) in jh.posteriors.iter().zip(&vfh.posteriors) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn fdo_ignores_priors((net, q) in net_and_query(), mean in 0.001f64..0.4, seed in any::<u64>()) {
        let scrambled = scramble_priors(&net, &ScrambleSpec::new(mean, seed)).unwrap();
        let n = q.positive.len();
        let mut cache = XiCache::new();
        let a = partition(&net, &q.positive, n / 2, TransformOrder::Fdo, Solver::Cvx, &mut cache).unwrap();
        let b = partition(&scrambled, &q.positive, n / 2, TransformOrder::Fdo, Solver::Cvx, &mut cache).unwrap();
        prop_assert_eq!(a, b);
        for j in net.symptom_ids() {
            prop_assert_eq!(net.parents(j), scrambled.parents(j));
        }
    }

    #[test]
    fn cache_returns_fresh_solve_bits((net, q) in net_and_query()) {
        let mut cache = XiCache::new();
        for &s in &q.positive {
            for solver in [Solver::Cvx, Solver::Ppf] {
                let first = cache.get(&net, s, solver, OddsSource::Prior).unwrap();
                let again = cache.get(&net, s, solver, OddsSource::Prior).unwrap();
                let fresh = solve_xi(&XiSolveProblem::from_priors(&net, s), solver).unwrap();
                prop_assert_eq!(first.to_bits(), fresh.to_bits());
                prop_assert_eq!(again.to_bits(), fresh.to_bits());
            }
        }
    }
}
