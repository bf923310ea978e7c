#![allow(dead_code)]

/// One-sample Kolmogorov-Smirnov distance of `values` against U(lo, hi).
pub fn ks_uniform(values: &[f64], lo: f64, hi: f64) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| (x - lo) / (hi - lo)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// O(n^2) reference for the non-dominated mask.
pub fn brute_force_efficient(points: &[Vec<f64>]) -> Vec<bool> {
    points
        .iter()
        .map(|p| {
            !points
                .iter()
                .any(|q| q.iter().zip(p).all(|(a, b)| a <= b) && q.iter().zip(p).any(|(a, b)| a < b))
        })
        .collect()
}
