mod common;

use std::sync::Arc;

use common::brute_force_efficient;
use proptest::prelude::*;
use scoremap::direct::DirectConfig;
use scoremap::ecdf::{build_transform, ScoreVector};
use scoremap::pareto::{
    build_front, dominates, filter_efficient, non_dominated_mask, order_by_total_score, ParetoArchive, SolutionRecord,
};
use scoremap::prefnet::make_dataset;
use scoremap::problem::{sample_decision_space, DecisionVector, ObjectiveVector, Problem};
use scoremap::scalarize::{scalarize, solve_for_preference, PreferenceVector, Scalarizer, ScalarizerKind};

fn record(objectives: Vec<f64>, total: f64) -> SolutionRecord {
    let k = objectives.len();
    SolutionRecord {
        preference: PreferenceVector::new(vec![1.0 / k as f64; k]).unwrap(),
        x: DecisionVector(vec![0.0]),
        objectives: ObjectiveVector(objectives),
        scores: ScoreVector(vec![total / k as f64; k]),
        total_score: total,
    }
}

/// A small desk front shared by the slower tests.
fn small_front(n: usize) -> (Problem, Arc<scoremap::ecdf::ScoreTransform>, ParetoArchive) {
    let p = Problem::viennet();
    let t = Arc::new(build_transform(&p, 10_000, 1, 1e-4).unwrap());
    let a = build_front(&p, &t, n, ScalarizerKind::Raw, &DirectConfig::with_max_evals(600), 3).unwrap();
    (p, t, a)
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..4)
        .prop_flat_map(|k| prop::collection::vec(prop::collection::vec((0i32..12).prop_map(f64::from), k), 1..500))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn mask_matches_brute_force(pts in points()) {
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        prop_assert_eq!(non_dominated_mask(&refs), brute_force_efficient(&pts));
    }

    #[test]
    fn ranking_ignores_monotone_rescaling(totals in prop::collection::vec(0.0f64..3.0, 1..60)) {
        // Anti-diagonal objectives keep every record efficient.
        let n = totals.len() as f64;
        let recs: Vec<_> = totals
            .iter()
            .enumerate()
            .map(|(i, t)| record(vec![i as f64, n - i as f64], *t))
            .collect();
        let archive = ParetoArchive::new(recs.clone(), "t");
        let squashed: Vec<_> = recs
            .iter()
            .map(|r| SolutionRecord { total_score: r.total_score.exp() * 2.0 - 1.0, ..r.clone() })
            .collect();
        let a: Vec<_> = order_by_total_score(&archive).iter().map(|r| r.objectives.clone()).collect();
        let b: Vec<_> = order_by_total_score(&ParetoArchive::new(squashed, "t"))
            .iter()
            .map(|r| r.objectives.clone())
            .collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn reversal_only_moves_ties() {
    let recs: Vec<_> = (0..40)
        .map(|i| record(vec![i as f64, 40.0 - i as f64], ((i * 7) % 11) as f64))
        .collect();
    let forward = order_by_total_score(&ParetoArchive::new(recs.clone(), "t"));
    let mut reversed_input = recs;
    reversed_input.reverse();
    let backward = order_by_total_score(&ParetoArchive::new(reversed_input, "t"));
    let totals = |v: &[SolutionRecord]| v.iter().map(|r| r.total_score).collect::<Vec<_>>();
    assert_eq!(totals(&forward), totals(&backward));
    assert_ne!(forward, backward);
}

#[test]
fn doubled_weights_same_minimizer() {
    let p = Problem::viennet();
    let t = Arc::new(build_transform(&p, 5000, 1, 1e-4).unwrap());
    let cfg = DirectConfig::with_max_evals(800);
    for kind in [ScalarizerKind::Raw, ScalarizerKind::Score] {
        let s = Scalarizer::of_kind(kind, Arc::clone(&t));
        let w = PreferenceVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let w2 = PreferenceVector::new(w.iter().map(|v| v * 2.0).collect()).unwrap();
        let a = solve_for_preference(&p, &w, &s, &t, &cfg).unwrap();
        let b = solve_for_preference(&p, &w2, &s, &t, &cfg).unwrap();
        assert_eq!(a.x, b.x, "{kind}");
    }
}

#[test]
fn score_aggregation_is_monotone() {
    let p = Problem::viennet();
    let t = Arc::new(build_transform(&p, 5000, 1, 1e-4).unwrap());
    let s = Scalarizer::score(Arc::clone(&t));
    let w = PreferenceVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let f = scalarize(&s, &p, &w).unwrap();
    let x = [1.0, 1.0];
    let base = f(&x);
    let scores = t.score(&p.evaluate(&x).unwrap()).unwrap();
    let aggregate = |s: &[f64]| -s.iter().zip(w.iter()).map(|(s, w)| s * w).sum::<f64>();
    assert!((base - aggregate(&scores)).abs() < 1e-12);
    for i in 0..3 {
        let mut better = scores.0.clone();
        better[i] = (better[i] + 0.1).min(1.0);
        assert!(aggregate(&better) < base);
    }
}

#[test]
fn same_inputs_same_record() {
    let p = Problem::viennet();
    let t = Arc::new(build_transform(&p, 2000, 1, 1e-4).unwrap());
    let s = Scalarizer::raw();
    let w = PreferenceVector::new(vec![0.6, 0.3, 0.1]).unwrap();
    let cfg = DirectConfig::with_max_evals(300);
    let a = solve_for_preference(&p, &w, &s, &t, &cfg).unwrap();
    assert_eq!(a, solve_for_preference(&p, &w, &s, &t, &cfg).unwrap());
    assert!(a.scores.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!((a.total_score - a.scores.iter().sum::<f64>()).abs() < 1e-12);
}

#[test]
fn front_survives_random_challengers() {
    let (p, _, archive) = small_front(150);
    let challengers: Vec<_> = sample_decision_space(&p, 10_000, 77)
        .unwrap()
        .iter()
        .map(|x| p.evaluate(x).unwrap())
        .collect();
    for r in archive.efficient() {
        for c in &challengers {
            assert!(
                !dominates(c, &r.objectives).unwrap(),
                "{:?} dominated by {:?}",
                r.objectives,
                c
            );
        }
    }
}

#[test]
fn score_space_agrees_with_objective_space() {
    let (_, _, archive) = small_front(300);
    let negated: Vec<Vec<f64>> = archive
        .records
        .iter()
        .map(|r| r.scores.iter().map(|s| -s).collect())
        .collect();
    let refs: Vec<&[f64]> = negated.iter().map(Vec::as_slice).collect();
    assert_eq!(non_dominated_mask(&refs), filter_efficient(&archive.records));
}

#[test]
fn dataset_split_is_a_partition() {
    let recs: Vec<_> = (0..100)
        .map(|i| {
            let a = 0.01 + i as f64 / 101.0;
            SolutionRecord::new(
                PreferenceVector::new(vec![a, 1.0 - a]).unwrap(),
                DecisionVector(vec![0.0]),
                ObjectiveVector(vec![i as f64, 100.0 - i as f64]),
                ScoreVector(vec![1.0 - a, a]),
            )
        })
        .collect();
    let archive = ParetoArchive::new(recs, "t");
    let d = make_dataset(&archive, 30, 4).unwrap();
    assert_eq!((d.train.len(), d.validation.len()), (30, 70));
    let mut all: Vec<_> = d.train.iter().chain(&d.validation).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
    for v in d.inputs.iter().chain(&d.targets) {
        assert_eq!(v.iter().copied().fold(0.0, f64::max), 1.0);
    }
    assert_eq!(d, make_dataset(&archive, 30, 4).unwrap());
    assert!(make_dataset(&archive, 101, 4).is_err());
}
