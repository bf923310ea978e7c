mod common;

use common::ks_uniform;
use proptest::prelude::*;
use scoremap::ecdf::{build_ecdf, build_transform, inverse_score, SmoothedEcdf};
use scoremap::problem::{sample_decision_space, viennet, Problem};

fn sup_distance(a: &SmoothedEcdf, b: &SmoothedEcdf) -> f64 {
    // Both are piecewise linear, so the supremum sits on a knot of one of them.
    a.knots_x()
        .iter()
        .chain(b.knots_x())
        .map(|&x| (a.cdf(x) - b.cdf(x)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn decision_samples_pass_ks_per_dimension() {
    let p = Problem::viennet();
    let xs = sample_decision_space(&p, 10_000, 5).unwrap();
    // Critical value for alpha = 0.01.
    let critical = 1.628 / (xs.len() as f64).sqrt();
    for d in 0..2 {
        let col: Vec<f64> = xs.iter().map(|x| x[d]).collect();
        let ks = ks_uniform(&col, -4.0, 4.0);
        assert!(ks < critical, "dimension {d}: D = {ks}");
    }
}

#[test]
fn viennet_is_pure_and_f2_at_least_15() {
    let p = Problem::viennet();
    for x in sample_decision_space(&p, 2000, 8).unwrap() {
        let a = viennet(&x).unwrap();
        assert_eq!(a, viennet(&x).unwrap());
        assert!(a[1] >= 15.0);
    }
}

#[test]
fn held_out_scores_are_uniform() {
    let p = Problem::viennet();
    let t = build_transform(&p, 100_000, 1, 1e-4).unwrap();
    let fresh = sample_decision_space(&p, 10_000, 99).unwrap();
    let scores: Vec<_> = fresh
        .iter()
        .map(|x| t.score(&p.evaluate(x).unwrap()).unwrap())
        .collect();
    for i in 0..3 {
        let col: Vec<f64> = scores.iter().map(|s| s[i]).collect();
        let ks = ks_uniform(&col, 0.0, 1.0);
        assert!(ks < 0.03, "objective {i}: D = {ks}");
    }
}

#[test]
fn few_samples_suffice() {
    let p = Problem::viennet();
    let big = build_transform(&p, 100_000, 1, 1e-4).unwrap();
    let small = build_transform(&p, 2500, 2, 1e-4).unwrap();
    for i in 0..3 {
        let d = sup_distance(&big.per_objective[i], &small.per_objective[i]);
        assert!(d < 0.05, "objective {i}: sup distance {d}");
    }
}

#[test]
fn viennet_marginals_are_not_uniform() {
    let t = build_transform(&Problem::viennet(), 100_000, 1, 1e-4).unwrap();
    for (i, e) in t.per_objective.iter().enumerate() {
        let (lo, hi) = (e.min_observed(), e.max_observed());
        let dev = e
            .knots_x()
            .iter()
            .map(|&x| (e.cdf(x) - (x - lo) / (hi - lo)).abs())
            .fold(0.0, f64::max);
        assert!(dev > 0.1, "objective {i} deviates only {dev}");
    }
}

#[test]
fn minimal_transform() {
    let t = build_transform(&Problem::viennet(), 2, 1, 1e-4).unwrap();
    assert!(t.per_objective.iter().all(|e| e.knots_x().len() == 2));
}

#[test]
fn median_loss_scores_one_half() {
    let p = Problem::viennet();
    let xs = sample_decision_space(&p, 20_001, 12).unwrap();
    let mut losses: Vec<f64> = xs.iter().map(|x| p.evaluate(x).unwrap()[0]).collect();
    let e = build_ecdf(&losses, 1e-4, None).unwrap();
    losses.sort_by(f64::total_cmp);
    let median = losses[losses.len() / 2];
    assert!((e.score(median) - 0.5).abs() < 1e-3, "{}", e.score(median));
}

#[test]
fn inverse_of_top_score_is_observed_minimum() {
    let e = build_ecdf(&[3.0, 1.0, 7.0, 4.0], 1e-4, None).unwrap();
    assert!((inverse_score(&e, 1.0 - 1e-4) - 1.0).abs() < 1e-9);
    let sym = build_ecdf(&[1.0, 2.0, 3.0, 4.0], 0.0, None).unwrap();
    assert!((inverse_score(&sym, 0.5) - 2.5).abs() < 1e-12);
}

fn losses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..300).prop_filter("needs spread", |v| v.iter().any(|x| *x != v[0]))
}

proptest! {
    #[test]
    fn scores_strictly_decrease(v in losses(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let e = build_ecdf(&v, 1e-4, None).unwrap();
        let (lo, hi) = e.support();
        let (a, b) = (lo + (hi - lo) * a.min(b), lo + (hi - lo) * a.max(b));
        prop_assume!(b - a > 1e-9 * (hi - lo));
        prop_assert!(e.score(a) > e.score(b));
        prop_assert!((0.0..=1.0).contains(&e.score(a)));
    }

    #[test]
    fn score_inverts_inverse_score(v in losses(), s in prop::collection::vec(0.0f64..=1.0, 100)) {
        let e = build_ecdf(&v, 1e-4, None).unwrap();
        for s in s {
            let back = e.score(inverse_score(&e, s));
            prop_assert!((back - s).abs() < 1e-9, "{} -> {}", s, back);
        }
    }

    #[test]
    fn any_sample_size_keeps_invariants(n in 2usize..3000, seed in 0u64..1000) {
        let t = build_transform(&Problem::viennet(), n, seed, 1e-4).unwrap();
        for e in &t.per_objective {
            prop_assert!(e.knots_x().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(e.knots_p().windows(2).all(|w| w[0] < w[1]));
            let (lo, hi) = e.support();
            prop_assert_eq!(e.score(lo), 1.0);
            prop_assert_eq!(e.score(hi), 0.0);
        }
    }
}
