//! Locally-biased DIRECT (DIRECT-L) for box-constrained global minimization.
//!
//! All geometry lives in the unit cube; a rectangle's side along dimension
//! `j` is `3^-level[j]`. Each iteration groups rectangles by their side-level
//! multiset (equal multisets share a diameter), keeps the lowest centre value
//! per group, and selects the potentially optimal ones from the lower-right
//! convex hull of `(diameter, f)`, subject to the epsilon-balance test
//! `f_j - K d_j <= f_min - eps |f_min|`. Each selected rectangle is split into
//! thirds along its lowest-index longest side.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BoxBounds, DecisionVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectConfig {
    pub max_evals: usize,
    pub max_iters: usize,
    pub epsilon_balance: f64,
    pub record_trace: bool,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            max_iters: 100_000,
            epsilon_balance: 1e-4,
            record_trace: false,
        }
    }
}

impl DirectConfig {
    pub fn with_max_evals(max_evals: usize) -> Self {
        Self {
            max_evals,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evals < 1 {
            return Err(Error::InvalidInput("max_evals must be at least 1".into()));
        }
        if !(self.epsilon_balance >= 0.0 && self.epsilon_balance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon_balance must be finite and non-negative, got {}",
                self.epsilon_balance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub best_x: DecisionVector,
    pub best_f: f64,
    pub evals_used: usize,
    pub iterations: usize,
    /// `(eval_index, best_f)` after every evaluation, 1-based.
    pub trace: Option<Vec<(usize, f64)>>,
}

/// An axis-aligned rectangle of the unit cube with its evaluated centre.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRect {
    pub center: Vec<f64>,
    pub levels: Vec<u32>,
    pub f_center: f64,
    pub diameter: f64,
}

impl HyperRect {
    pub fn new(center: Vec<f64>, levels: Vec<u32>, f_center: f64) -> Self {
        let diameter = diameter_of(&levels);
        Self {
            center,
            levels,
            f_center,
            diameter,
        }
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| side(l)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.levels.iter().map(|&l| side(l)).product()
    }

    /// Index of the longest side, lowest index on ties.
    pub fn split_dim(&self) -> usize {
        let min_level = *self.levels.iter().min().expect("non-empty rectangle");
        self.levels.iter().position(|&l| l == min_level).unwrap()
    }

    fn class_key(&self) -> Vec<u32> {
        let mut key = self.levels.clone();
        key.sort_unstable();
        key
    }
}

fn side(level: u32) -> f64 {
    3f64.powi(-(level as i32))
}

/// Euclidean norm of the half-side vector.
fn diameter_of(levels: &[u32]) -> f64 {
    levels.iter().map(|&l| (0.5 * side(l)).powi(2)).sum::<f64>().sqrt()
}

/// Trisects `rect` along its longest side. Children are ordered by offset
/// `-1/3, 0, +1/3` of the old side; the middle child keeps the parent value
/// and `f` is called exactly twice, on the unit-cube centres of the outer
/// children.
pub fn trisect<F>(rect: &HyperRect, mut f: F) -> Result<[HyperRect; 3]>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = rect.split_dim();
    let offset = side(rect.levels[d] + 1);
    let mut levels = rect.levels.clone();
    levels[d] += 1;

    let mut lower = rect.center.clone();
    lower[d] -= offset;
    let mut upper = rect.center.clone();
    upper[d] += offset;
    let f_lower = f(&lower)?;
    let f_upper = f(&upper)?;

    Ok([
        HyperRect::new(lower, levels.clone(), f_lower),
        HyperRect::new(rect.center.clone(), levels.clone(), rect.f_center),
        HyperRect::new(upper, levels, f_upper),
    ])
}

fn checked_eval<F>(bounds: &BoxBounds, objective: &mut F, evals: &mut usize, unit: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let x = bounds.from_unit(unit);
    let value = objective(&x);
    *evals += 1;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            point: x.into_inner(),
            value,
        })
    }
}

/// A rectangle inside its diameter class, ordered by value then age.
#[derive(Debug, Clone, Copy)]
struct Member {
    f: f64,
    idx: usize,
}

impl PartialEq for Member {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Member {}

impl PartialOrd for Member {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Member {
    fn cmp(&self, other: &Self) -> Ordering {
        self.f.total_cmp(&other.f).then(self.idx.cmp(&other.idx))
    }
}

/// Incremental DIRECT-L state over a box.
pub struct DirectL<'a, F> {
    objective: F,
    bounds: &'a BoxBounds,
    config: DirectConfig,
    rects: Vec<HyperRect>,
    groups: BTreeMap<Vec<u32>, BTreeSet<Member>>,
    evals: usize,
    iterations: usize,
    best_index: usize,
    trace: Option<Vec<(usize, f64)>>,
    exhausted: bool,
}

impl<'a, F> DirectL<'a, F>
where
    F: FnMut(&[f64]) -> f64,
{
    /// Evaluates the centre of the box.
    pub fn new(objective: F, bounds: &'a BoxBounds, config: DirectConfig) -> Result<Self> {
        config.validate()?;
        let m = bounds.dim();
        let mut state = Self {
            objective,
            bounds,
            trace: config.record_trace.then(Vec::new),
            config,
            rects: Vec::new(),
            groups: BTreeMap::new(),
            evals: 0,
            iterations: 0,
            best_index: 0,
            exhausted: false,
        };
        let center = vec![0.5; m];
        let f0 = checked_eval(state.bounds, &mut state.objective, &mut state.evals, &center)?;
        state.insert(HyperRect::new(center, vec![0; m], f0));
        state.record(f0);
        Ok(state)
    }

    /// Stores `rect` at `idx` (appending when `idx == rects.len()`).
    fn place(&mut self, idx: usize, rect: HyperRect) {
        self.groups
            .entry(rect.class_key())
            .or_default()
            .insert(Member { f: rect.f_center, idx });
        if idx == self.rects.len() {
            self.rects.push(rect);
        } else {
            self.rects[idx] = rect;
        }
    }

    fn insert(&mut self, rect: HyperRect) {
        self.place(self.rects.len(), rect);
    }

    fn detach(&mut self, idx: usize) {
        let r = &self.rects[idx];
        let key = r.class_key();
        let member = Member { f: r.f_center, idx };
        if let Some(set) = self.groups.get_mut(&key) {
            set.remove(&member);
            if set.is_empty() {
                self.groups.remove(&key);
            }
        }
    }

    fn record(&mut self, value: f64) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push((self.evals, value));
        }
    }

    pub fn rects(&self) -> &[HyperRect] {
        &self.rects
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn best(&self) -> &HyperRect {
        &self.rects[self.best_index]
    }

    pub fn is_done(&self) -> bool {
        self.exhausted || self.iterations >= self.config.max_iters || self.evals + 2 > self.config.max_evals
    }

    /// Indices of the potentially optimal rectangles, ordered by diameter.
    pub fn potentially_optimal(&self) -> Vec<usize> {
        // Lowest value per diameter class; ties go to the earliest rectangle.
        let mut reps: Vec<usize> = self
            .groups
            .values()
            .map(|set| set.first().expect("classes are never empty").idx)
            .collect();
        reps.sort_by(|&a, &b| {
            self.rects[a]
                .diameter
                .total_cmp(&self.rects[b].diameter)
                .then_with(|| self.rects[a].class_key().cmp(&self.rects[b].class_key()))
        });

        let point = |i: usize| (self.rects[i].diameter, self.rects[i].f_center);
        let f_min = self.rects[self.best_index].f_center;

        // Start at the largest rectangle among those attaining the minimum.
        let start = reps
            .iter()
            .enumerate()
            .filter(|(_, &i)| self.rects[i].f_center == f_min)
            .map(|(pos, _)| pos)
            .last()
            .expect("best rectangle belongs to some group");

        let mut hull: Vec<usize> = Vec::new();
        for &i in &reps[start..] {
            let (d, f) = point(i);
            if let Some(&last) = hull.last() {
                if point(last).0 == d {
                    if f >= point(last).1 {
                        continue;
                    }
                    hull.pop();
                }
            }
            while hull.len() >= 2 {
                let (d1, f1) = point(hull[hull.len() - 2]);
                let (d2, f2) = point(hull[hull.len() - 1]);
                // Pop the middle point unless it lies strictly below the chord.
                let cross = (d2 - d1) * (f - f1) - (f2 - f1) * (d - d1);
                if cross <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(i);
        }

        let threshold = f_min - self.config.epsilon_balance * f_min.abs();
        let mut selected = Vec::with_capacity(hull.len());
        for (pos, &i) in hull.iter().enumerate() {
            let (d, f) = point(i);
            match hull.get(pos + 1) {
                None => selected.push(i),
                Some(&next) => {
                    let (dn, fn_) = point(next);
                    let k_max = (fn_ - f) / (dn - d);
                    if f - k_max * d <= threshold {
                        selected.push(i);
                    }
                }
            }
        }
        selected
    }

    /// Runs one iteration; returns false once the budget is exhausted.
    pub fn iterate(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        for idx in self.potentially_optimal() {
            if self.evals + 2 > self.config.max_evals {
                self.exhausted = true;
                break;
            }
            let parent = self.rects[idx].clone();
            let (bounds, objective, evals) = (self.bounds, &mut self.objective, &mut self.evals);
            let [lower, middle, upper] = trisect(&parent, |unit| checked_eval(bounds, objective, evals, unit))?;
            self.detach(idx);
            self.place(idx, middle);
            let first_eval = self.evals - 1;
            for (offset, child) in [lower, upper].into_iter().enumerate() {
                let value = child.f_center;
                self.insert(child);
                if value < self.rects[self.best_index].f_center {
                    self.best_index = self.rects.len() - 1;
                }
                let best = self.rects[self.best_index].f_center;
                if let Some(trace) = self.trace.as_mut() {
                    trace.push((first_eval + offset, best));
                }
            }
        }
        self.iterations += 1;
        Ok(true)
    }

    pub fn result(&self) -> DirectResult {
        let best = self.best();
        DirectResult {
            best_x: self.bounds.from_unit(&best.center),
            best_f: best.f_center,
            evals_used: self.evals,
            iterations: self.iterations,
            trace: self.trace.clone(),
        }
    }
}

/// Minimizes `f` over `bounds` with DIRECT-L.
pub fn minimize<F>(f: F, bounds: &BoxBounds, config: &DirectConfig) -> Result<DirectResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut state = DirectL::new(f, bounds, config.clone())?;
    while state.iterate()? {}
    Ok(state.result())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> HyperRect {
        HyperRect::new(vec![0.5, 0.5], vec![0, 0], 0.0)
    }

    #[test]
    fn trisect_unit_square() {
        let mut calls = 0;
        let children = trisect(&unit_square(), |x| {
            calls += 1;
            Ok(x[0])
        })
        .unwrap();
        assert_eq!(calls, 2);
        for c in &children {
            assert!((c.side_lengths()[0] - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(c.side_lengths()[1], 1.0);
            assert!(c.diameter < unit_square().diameter);
        }
        assert!((children[0].center[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(children[1].center, vec![0.5, 0.5]);
        assert!((children[2].center[0] - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(children[1].f_center, 0.0);
    }

    #[test]
    fn repeated_trisection_shrinks_by_thirds() {
        let mut r = HyperRect::new(vec![0.5], vec![0], 0.0);
        for _ in 0..6 {
            let [_, mid, _] = trisect(&r, |_| Ok(1.0)).unwrap();
            assert!(mid.diameter < r.diameter);
            r = mid;
        }
        assert!((r.side_lengths()[0] - 3f64.powi(-6)).abs() < 1e-15);
    }

    #[test]
    fn longest_side_lowest_index() {
        let r = HyperRect::new(vec![0.5; 3], vec![1, 0, 0], 0.0);
        assert_eq!(r.split_dim(), 1);
    }

    #[test]
    fn sphere_minimum() {
        let bounds = BoxBounds::uniform(2, -4.0, 4.0).unwrap();
        let res = minimize(
            |x| x[0] * x[0] + x[1] * x[1],
            &bounds,
            &DirectConfig::with_max_evals(500),
        )
        .unwrap();
        assert!(res.best_f < 1e-4, "best_f {}", res.best_f);
        assert!(res.evals_used <= 500);
    }

    #[test]
    fn shifted_parabola_1d() {
        let bounds = BoxBounds::uniform(1, -4.0, 4.0).unwrap();
        let res = minimize(|x| (x[0] - 1.0).powi(2), &bounds, &DirectConfig::with_max_evals(200)).unwrap();
        assert!((res.best_x[0] - 1.0).abs() < 0.01, "best_x {:?}", res.best_x);
    }

    #[test]
    fn non_finite_aborts_with_point() {
        let bounds = BoxBounds::uniform(1, -1.0, 1.0).unwrap();
        let err = minimize(
            |x| if x[0] > 0.5 { f64::NAN } else { x[0] },
            &bounds,
            &DirectConfig::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFinite { point, .. } => assert!(point[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bounds = BoxBounds::uniform(1, 0.0, 1.0).unwrap();
        assert!(minimize(|x| x[0], &bounds, &DirectConfig::with_max_evals(0)).is_err());
        let cfg = DirectConfig {
            epsilon_balance: -1.0,
            ..DirectConfig::default()
        };
        assert!(minimize(|x| x[0], &bounds, &cfg).is_err());
    }

    #[test]
    fn trace_is_monotone_and_complete() {
        let bounds = BoxBounds::uniform(2, -4.0, 4.0).unwrap();
        let cfg = DirectConfig {
            record_trace: true,
            ..DirectConfig::with_max_evals(301)
        };
        let res = minimize(|x| (x[0] - 0.3).powi(2) + (x[1] + 1.7).abs(), &bounds, &cfg).unwrap();
        let trace = res.trace.unwrap();
        assert_eq!(trace.len(), res.evals_used);
        assert!(trace.iter().enumerate().all(|(i, (e, _))| *e == i + 1));
        assert!(trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(trace.last().unwrap().1, res.best_f);
    }
}
