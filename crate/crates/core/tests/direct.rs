use rand::Rng;
use scoremap::direct::{minimize, trisect, DirectConfig, DirectL, HyperRect};
use scoremap::problem::BoxBounds;
use scoremap::seeded_rng;

fn six_hump_camel(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    (4.0 - 2.1 * a * a + a.powi(4) / 3.0) * a * a + a * b + (-4.0 + 4.0 * b * b) * b * b
}

fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

#[test]
fn rectangles_tile_the_box() {
    let bounds = BoxBounds::uniform(3, -2.0, 2.0).unwrap();
    let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>() + x[0].sin();
    let mut d = DirectL::new(f, &bounds, DirectConfig::with_max_evals(3000)).unwrap();
    let mut iterations = 0;
    while d.iterate().unwrap() {
        iterations += 1;
        let volume: f64 = d.rects().iter().map(HyperRect::volume).sum();
        assert!((volume - 1.0).abs() < 1e-9, "iteration {iterations}: volume {volume}");
        assert!(d.rects().iter().all(|r| r.f_center.is_finite()));
    }
    assert!(iterations > 10);
    assert_eq!(d.rects().len(), d.evals());
}

#[test]
fn largest_box_shrinks() {
    let bounds = BoxBounds::uniform(2, -2.0, 2.0).unwrap();
    let initial = HyperRect::new(vec![0.5, 0.5], vec![0, 0], 0.0).diameter;
    for f in [rosenbrock as fn(&[f64]) -> f64, six_hump_camel] {
        let mut d = DirectL::new(f, &bounds, DirectConfig::with_max_evals(10_000)).unwrap();
        while d.iterate().unwrap() {}
        let largest = d.rects().iter().map(|r| r.diameter).fold(0.0, f64::max);
        assert!(
            largest < 0.5 * initial,
            "largest diameter {largest} vs initial {initial}"
        );
    }
}

#[test]
fn camel_matches_random_search() {
    let bounds = BoxBounds::new(vec![-3.0, -2.0], vec![3.0, 2.0]).unwrap();
    let mut rng = seeded_rng(2024);
    let mut random_best = f64::INFINITY;
    for _ in 0..1_000_000 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)];
        random_best = random_best.min(six_hump_camel(&x));
    }
    let r = minimize(six_hump_camel, &bounds, &DirectConfig::with_max_evals(2000)).unwrap();
    assert!(
        r.best_f - random_best < 1e-3,
        "direct {} vs random {}",
        r.best_f,
        random_best
    );
    assert!((r.best_f + 1.031_628_453).abs() < 1e-3);
}

#[test]
fn more_budget_never_hurts() {
    let bounds = BoxBounds::uniform(2, -3.0, 3.0).unwrap();
    let mut previous = f64::INFINITY;
    for budget in (20..=600).step_by(20) {
        let r = minimize(six_hump_camel, &bounds, &DirectConfig::with_max_evals(budget)).unwrap();
        assert!(r.best_f <= previous, "budget {budget}: {} > {previous}", r.best_f);
        assert!(r.evals_used <= budget);
        previous = r.best_f;
    }
}

#[test]
fn identical_config_identical_trace() {
    let bounds = BoxBounds::uniform(2, -2.0, 2.0).unwrap();
    let cfg = DirectConfig {
        record_trace: true,
        ..DirectConfig::with_max_evals(800)
    };
    let a = minimize(rosenbrock, &bounds, &cfg).unwrap();
    let b = minimize(rosenbrock, &bounds, &cfg).unwrap();
    assert_eq!(a, b);
    let trace = a.trace.unwrap();
    assert!(trace.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn children_are_smaller() {
    let mut rect = HyperRect::new(vec![0.5; 3], vec![0; 3], 1.0);
    for _ in 0..7 {
        let children = trisect(&rect, |x| Ok(x.iter().sum())).unwrap();
        for c in &children {
            assert!(c.diameter < rect.diameter);
        }
        rect = children[1].clone();
    }
}

#[test]
fn nan_reports_offending_point() {
    let bounds = BoxBounds::uniform(1, 0.0, 1.0).unwrap();
    let err = minimize(
        |x: &[f64]| if x[0] > 0.6 { f64::NAN } else { x[0] },
        &bounds,
        &DirectConfig::default(),
    )
    .unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("0.83"), "{msg}");
}
