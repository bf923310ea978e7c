//! Pareto dominance, preference-sweep fronts and total-score ordering.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::DirectConfig;
use crate::ecdf::{ScoreTransform, ScoreVector};
use crate::error::{Error, Result};
use crate::problem::{DecisionVector, ObjectiveVector, Problem};
use crate::scalarize::{sample_preferences, solve_for_preference, PreferenceVector, Scalarizer, ScalarizerKind};

/// One solved preference with its losses and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub preference: PreferenceVector,
    pub x: DecisionVector,
    pub objectives: ObjectiveVector,
    pub scores: ScoreVector,
    pub total_score: f64,
}

impl SolutionRecord {
    pub fn new(
        preference: PreferenceVector,
        x: DecisionVector,
        objectives: ObjectiveVector,
        scores: ScoreVector,
    ) -> Self {
        let total_score = scores.total();
        Self {
            preference,
            x,
            objectives,
            scores,
            total_score,
        }
    }
}

/// `a` dominates `b` under minimization.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strictly |= x < y;
    }
    strictly
}

/// Non-dominated mask over arbitrary vectors of equal length.
///
/// Points are visited in lexicographic order, so a point can only be
/// dominated by one visited earlier; by transitivity it suffices to compare
/// against the non-dominated points found so far.
pub fn non_dominated_mask(points: &[&[f64]]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut mask = vec![false; points.len()];
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&j| dominates_unchecked(points[j], points[i])) {
            mask[i] = true;
            front.push(i);
        }
    }
    mask
}

/// Marks the records not dominated in objective space by any other record.
pub fn filter_efficient(records: &[SolutionRecord]) -> Vec<bool> {
    let points: Vec<&[f64]> = records.iter().map(|r| &*r.objectives).collect();
    non_dominated_mask(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub records: Vec<SolutionRecord>,
    pub transform_id: String,
    pub efficient_mask: Vec<bool>,
}

impl ParetoArchive {
    /// Wraps `records`, computing the efficiency mask.
    pub fn new(records: Vec<SolutionRecord>, transform_id: impl Into<String>) -> Self {
        let efficient_mask = filter_efficient(&records);
        Self {
            records,
            transform_id: transform_id.into(),
            efficient_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn efficient(&self) -> impl Iterator<Item = &SolutionRecord> + '_ {
        self.records
            .iter()
            .zip(&self.efficient_mask)
            .filter_map(|(r, keep)| keep.then_some(r))
    }

    pub fn efficient_count(&self) -> usize {
        self.efficient_mask.iter().filter(|m| **m).count()
    }

    /// Recomputes scores and totals with `transform`.
    pub fn rescore(&mut self, transform: &ScoreTransform) -> Result<()> {
        for r in &mut self.records {
            r.scores = transform.score(&r.objectives)?;
            r.total_score = r.scores.total();
        }
        self.transform_id = transform.id();
        Ok(())
    }
}

/// Solves `n_prefs` random preferences and collects them, in sample order,
/// into an archive.
pub fn build_front(
    problem: &Problem,
    transform: &Arc<ScoreTransform>,
    n_prefs: usize,
    kind: ScalarizerKind,
    config: &DirectConfig,
    seed: u64,
) -> Result<ParetoArchive> {
    let prefs = sample_preferences(problem.objective_count(), n_prefs, seed)?;
    solve_all(problem, transform, &prefs, kind, config)
}

/// Solves each preference (in parallel) and archives the records in input order.
pub fn solve_all(
    problem: &Problem,
    transform: &Arc<ScoreTransform>,
    prefs: &[PreferenceVector],
    kind: ScalarizerKind,
    config: &DirectConfig,
) -> Result<ParetoArchive> {
    let scalarizer = Scalarizer::of_kind(kind, Arc::clone(transform));
    let records = prefs
        .par_iter()
        .map(|w| solve_for_preference(problem, w, &scalarizer, transform, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParetoArchive::new(records, transform.id()))
}

/// Efficient records by descending total score, stable on ties.
pub fn order_by_total_score(archive: &ParetoArchive) -> Vec<SolutionRecord> {
    let mut ranked: Vec<SolutionRecord> = archive.efficient().cloned().collect();
    ranked.sort_by(|a, b| b.total_score.total_cmp(&a.total_score));
    ranked
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidInput("histogram needs at least one bin".into()));
        }
        let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        Self::with_range(values, bins, lo, hi)
    }

    pub fn with_range(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidInput("histogram needs at least one bin".into()));
        }
        if values.is_empty() {
            return Ok(Self {
                edges: vec![0.0; bins + 1],
                counts: vec![0; bins],
            });
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0; bins];
        for v in values {
            let bin = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(bin_lo, bin_hi, count)` rows.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.edges.windows(2).zip(&self.counts).map(|(e, c)| (e[0], e[1], *c))
    }
}

/// Histogram of the efficient records' total scores.
pub fn total_score_density(archive: &ParetoArchive, bins: usize) -> Result<Histogram> {
    let totals: Vec<f64> = archive.efficient().map(|r| r.total_score).collect();
    Histogram::from_values(&totals, bins)
}
