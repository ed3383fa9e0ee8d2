use proptest::prelude::*;
use rand::Rng;

use ising_meta::ising::{
    conditional_prob, exact_joint_distribution, node_loss, node_loss_gradient, num_pairs, pair_index, pair_of,
    variance_weight,
};
use ising_meta::recovery::{reconcile, score, ReconcileRule};
use ising_meta::solver::{
    kkt_residual, lambda_max, pooled_loss, solve_node_l1, solve_node_l1_from, SolverConfig,
};
use ising_meta::{seed, IsingParameter, NodeView, SampleMatrix, SignedEdgeSet};

fn model(max_p: usize, scale: f64) -> impl Strategy<Value = IsingParameter> {
    (2..=max_p).prop_flat_map(move |p| {
        prop::collection::vec(-scale..scale, num_pairs(p))
            .prop_map(move |w| IsingParameter::from_weights(p, w).unwrap())
    })
}

fn spins(p: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = SampleMatrix> {
    prop::collection::vec(prop::bool::ANY, n).prop_flat_map(move |rows| {
        let n = rows.len();
        prop::collection::vec(prop::bool::ANY, n * p)
            .prop_map(move |bits| SampleMatrix::new(p, bits.iter().map(|&b| if b { 1 } else { -1 }).collect()).unwrap())
    })
}

/// A node regression instance: samples, reference node, weight vector.
fn instance(max_p: usize) -> impl Strategy<Value = (SampleMatrix, usize, Vec<f64>)> {
    (2..=max_p).prop_flat_map(|p| (spins(p, 1..=40), 0..p, prop::collection::vec(-2.0..2.0f64, p - 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences((samples, r, w) in instance(8)) {
        let p = samples.p();
        let g = node_loss_gradient(&NodeView::new(p, r, w.clone()).unwrap(), &samples).unwrap();
        let h = 1e-5;
        let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for j in 0..p - 1 {
            let (mut a, mut b) = (w.clone(), w.clone());
            a[j] += h;
            b[j] -= h;
            let fa = node_loss(&NodeView::new(p, r, a).unwrap(), &samples).unwrap();
            let fb = node_loss(&NodeView::new(p, r, b).unwrap(), &samples).unwrap();
            prop_assert!(((fa - fb) / (2.0 * h) - g[j]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn conditional_matches_joint(theta in model(8, 1.5), bits in prop::collection::vec(prop::bool::ANY, 8), r in 0usize..8) {
        let p = theta.p();
        let r = r % p;
        let mut x: Vec<i8> = bits[..p].iter().map(|&b| if b { 1 } else { -1 }).collect();
        let table = exact_joint_distribution(&theta).unwrap();
        x[r] = 1;
        let up = table.prob(&x);
        x[r] = -1;
        let down = table.prob(&x);
        x[r] = 1;
        prop_assert!((conditional_prob(&theta, r, &x).unwrap() - up / (up + down)).abs() <= 1e-12);
    }

    #[test]
    fn joint_is_normalized_and_flip_symmetric(theta in model(7, 2.0)) {
        let table = exact_joint_distribution(&theta).unwrap();
        prop_assert!((table.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (x, px) in table.iter() {
            let neg: Vec<i8> = x.iter().map(|v| -v).collect();
            prop_assert!((table.prob(&neg) - px).abs() <= 1e-12 * px.max(1e-300).max(1.0));
        }
    }

    #[test]
    fn loss_is_midpoint_convex((samples, r, w) in instance(6), other in prop::collection::vec(-2.0..2.0f64, 5)) {
        let p = samples.p();
        let v: Vec<f64> = other[..p - 1].to_vec();
        let mid: Vec<f64> = w.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |x: Vec<f64>| node_loss(&NodeView::new(p, r, x).unwrap(), &samples).unwrap();
        prop_assert!(f(mid) <= 0.5 * (f(w.clone()) + f(v.clone())) + 1e-12);
    }

    #[test]
    fn variance_weight_identity(theta in model(6, 2.0), bits in prop::collection::vec(prop::bool::ANY, 6), r in 0usize..6) {
        let p = theta.p();
        let r = r % p;
        let mut u: Vec<i8> = bits[..p].iter().map(|&b| if b { 1 } else { -1 }).collect();
        let w = variance_weight(&u, &theta, r).unwrap();
        u[r] = 1;
        let c = conditional_prob(&theta, r, &u).unwrap();
        prop_assert!(w > 0.0 && w <= 1.0);
        prop_assert!((w - 4.0 * c * (1.0 - c)).abs() <= 1e-12);
    }

    #[test]
    fn pair_index_is_a_bijection(p in 2usize..40) {
        let mut seen = vec![false; num_pairs(p)];
        for s in 0..p {
            for t in s + 1..p {
                let k = pair_index(p, s, t);
                prop_assert!(!seen[k]);
                seen[k] = true;
                prop_assert_eq!(pair_of(p, k), (s, t));
            }
        }
    }

    #[test]
    fn pooled_loss_is_task_average((a, r, w) in instance(6), seed_b in any::<u64>()) {
        let p = a.p();
        let mut rng = seed::stream(seed_b, &[]);
        let b = SampleMatrix::new(p, (0..17 * p).map(|_| if rng.random_bool(0.3) { 1 } else { -1 }).collect()).unwrap();
        let view = NodeView::new(p, r, w).unwrap();
        let pooled = pooled_loss(&view, &[a.clone(), b.clone()]).unwrap();
        let avg = 0.5 * (node_loss(&view, &a).unwrap() + node_loss(&view, &b).unwrap());
        prop_assert!((pooled - avg).abs() <= 1e-12);
    }

    #[test]
    fn converged_solves_are_certified((samples, r, _w) in instance(7), frac in 0.02..1.2f64) {
        let sets = std::slice::from_ref(&samples);
        let lambda = frac * lambda_max(r, sets).unwrap();
        let cfg = SolverConfig::default();
        let rep = solve_node_l1(r, sets, lambda, &cfg).unwrap();
        if rep.converged {
            prop_assert!(rep.kkt_residual <= cfg.tol);
            prop_assert!(kkt_residual(&rep.estimate, sets, lambda).unwrap() <= cfg.tol);
        }
        if frac >= 1.0 {
            prop_assert!(rep.estimate.weights.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn scores_are_consistent(pairs_a in prop::collection::btree_set((0usize..6, 0usize..6), 0..10),
                             pairs_b in prop::collection::btree_set((0usize..6, 0usize..6), 0..10)) {
        let build = |pairs: &std::collections::BTreeSet<(usize, usize)>| {
            let mut set = SignedEdgeSet::new(6);
            let unordered: std::collections::BTreeSet<(usize, usize)> =
                pairs.iter().filter(|(s, t)| s != t).map(|&(s, t)| (s.min(t), s.max(t))).collect();
            for (s, t) in unordered {
                set.insert(s, t, if (s + t) % 2 == 0 { 1 } else { -1 }).unwrap();
            }
            set
        };
        let (a, b) = (build(&pairs_a), build(&pairs_b));
        let sc = score(&a, &b, true).unwrap();
        prop_assert!((0.0..=1.0).contains(&sc.precision) && (0.0..=1.0).contains(&sc.recall));
        prop_assert_eq!(sc.exact_match, a == b);
        let same = score(&a, &a, false).unwrap();
        prop_assert!(same.exact_match && same.f1 == 1.0 || a.is_empty());
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<SignedEdgeSet>(&json).unwrap(), a);
    }
}

fn gibbs_instance(seed_value: u64, p: usize, n: usize) -> (IsingParameter, SampleMatrix) {
    let mut rng = seed::stream(seed_value, &[]);
    let w = (0..num_pairs(p)).map(|_| if rng.random_bool(0.4) { rng.random_range(-0.8..0.8) } else { 0.0 }).collect();
    let theta = IsingParameter::from_weights(p, w).unwrap();
    let samples = ising_meta::gibbs::gibbs_sample(&theta, n, 10, &mut rng).unwrap();
    (theta, samples)
}

#[test]
fn support_shrinks_along_the_regularization_path() {
    let cfg = SolverConfig::default();
    let (mut violations, mut steps) = (0, 0);
    for inst in 0..40 {
        let (_, samples) = gibbs_instance(1000 + inst, 6, 150);
        let sets = std::slice::from_ref(&samples);
        for r in 0..6 {
            let top = lambda_max(r, sets).unwrap();
            let mut prev = usize::MAX;
            for i in 0..10 {
                // geometric grid from top/100 up to top
                let lambda = top * 100f64.powf(-(9 - i) as f64 / 9.0);
                let rep = solve_node_l1(r, sets, lambda, &cfg).unwrap();
                let size = rep.estimate.weights.iter().filter(|v| v.abs() > cfg.zero_threshold).count();
                if i > 0 {
                    steps += 1;
                    if size > prev {
                        violations += 1;
                    }
                }
                prev = size;
            }
        }
    }
    assert!(violations as f64 <= 0.05 * steps as f64, "{violations} of {steps}");
}

#[test]
fn solution_does_not_depend_on_the_start() {
    let cfg = SolverConfig::default();
    let mut rng = seed::stream(77, &[]);
    for inst in 0..20 {
        let (_, samples) = gibbs_instance(2000 + inst, 5, 300);
        let sets = std::slice::from_ref(&samples);
        for r in 0..5 {
            let lambda = 0.3 * lambda_max(r, sets).unwrap();
            let a = solve_node_l1(r, sets, lambda, &cfg).unwrap();
            let init: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = solve_node_l1_from(r, sets, lambda, &cfg, &init).unwrap();
            assert!(a.converged && b.converged);
            for (x, y) in a.estimate.weights.iter().zip(&b.estimate.weights) {
                assert!((x - y).abs() <= 1e-6, "instance {inst} node {r}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn and_rule_is_contained_in_max_and_or() {
    let cfg = SolverConfig::default();
    for inst in 0..10 {
        let (_, samples) = gibbs_instance(3000 + inst, 6, 100);
        let sets = std::slice::from_ref(&samples);
        let reports: Vec<_> = (0..6).map(|r| solve_node_l1(r, sets, 0.08, &cfg).unwrap()).collect();
        let and = reconcile(&reports, ReconcileRule::And, cfg.zero_threshold);
        let or = reconcile(&reports, ReconcileRule::Or, cfg.zero_threshold);
        let max = reconcile(&reports, ReconcileRule::Max, cfg.zero_threshold);
        assert!(and.is_subset_of(&or));
        assert_eq!(or, max);
    }
}
