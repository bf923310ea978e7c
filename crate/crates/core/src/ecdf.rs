//! Smoothed empirical CDFs and the complementary-CDF score transform.
//!
//! Each objective's losses are summarized by a strictly increasing
//! piecewise-linear CDF. Knots sit at the midpoint plotting positions
//! `(i - 0.5) / n` of the empirical step function, rescaled so that the
//! smallest observed loss has probability `tail_epsilon` and the largest
//! `1 - tail_epsilon`. Linear tails of width `tail_span` extend the curve
//! down to 0 and up to 1 so that losses outside the observed range still
//! map to distinct probabilities.
//!
//! The score of a loss is `1 - cdf(loss)`: low loss, high score.

use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::problem::{sample_decision_space, ObjectiveVector, Problem};

pub const DEFAULT_TAIL_EPSILON: f64 = 1e-4;
/// Tail width as a fraction of the observed loss range.
pub const DEFAULT_TAIL_SPAN_FRACTION: f64 = 0.05;
/// ECDFs built from more samples than this are thinned.
pub const COMPRESSION_THRESHOLD: usize = 10_000;
pub const MAX_KNOTS: usize = 4096;

/// Per-objective scores in `[0, 1]`; higher is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ScoreVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedEcdf {
    knots_x: Vec<f64>,
    knots_p: Vec<f64>,
    tail_epsilon: f64,
    tail_span: f64,
}

impl SmoothedEcdf {
    /// Builds the smoothed ECDF of `losses`.
    ///
    /// `tail_epsilon` may be 0 (then the tails are flat); `tail_span`
    /// defaults to 5% of the observed range when `None`. More than
    /// [`COMPRESSION_THRESHOLD`] losses are thinned to at most
    /// [`MAX_KNOTS`] knots.
    pub fn build(losses: &[f64], tail_epsilon: f64, tail_span: Option<f64>) -> Result<Self> {
        let max_knots = (losses.len() > COMPRESSION_THRESHOLD).then_some(MAX_KNOTS);
        Self::build_with_limit(losses, tail_epsilon, tail_span, max_knots)
    }

    /// As [`SmoothedEcdf::build`] but with an explicit knot limit (`None`
    /// keeps every distinct loss).
    pub fn build_with_limit(
        losses: &[f64],
        tail_epsilon: f64,
        tail_span: Option<f64>,
        max_knots: Option<usize>,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&tail_epsilon) {
            return Err(Error::InvalidInput(format!(
                "tail_epsilon must lie in [0, 0.5), got {tail_epsilon}"
            )));
        }
        if let Some(bad) = losses.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite loss {bad}")));
        }
        let mut sorted = losses.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;

        // One knot per distinct loss, at the largest cumulative count of its run.
        let mut knots_x = Vec::new();
        let mut raw_p = Vec::new();
        for (i, &x) in sorted.iter().enumerate() {
            if sorted.get(i + 1) == Some(&x) {
                continue;
            }
            knots_x.push(x);
            raw_p.push((i as f64 + 0.5) / n);
        }
        if knots_x.len() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 distinct losses, got {}",
                knots_x.len()
            )));
        }

        let (p_first, p_last) = (raw_p[0], raw_p[raw_p.len() - 1]);
        let scale = (1.0 - 2.0 * tail_epsilon) / (p_last - p_first);
        let mut knots_p: Vec<f64> = raw_p.iter().map(|p| tail_epsilon + (p - p_first) * scale).collect();
        let last = knots_p.len() - 1;
        knots_p[0] = tail_epsilon;
        knots_p[last] = 1.0 - tail_epsilon;

        if let Some(limit) = max_knots {
            if knots_x.len() > limit {
                (knots_x, knots_p) = thin(&knots_x, &knots_p, limit);
            }
        }

        let range = knots_x[knots_x.len() - 1] - knots_x[0];
        let tail_span = tail_span.unwrap_or(DEFAULT_TAIL_SPAN_FRACTION * range);
        Self::from_knots(knots_x, knots_p, tail_epsilon, tail_span)
    }

    /// Validating constructor for previously built knots.
    pub fn from_knots(knots_x: Vec<f64>, knots_p: Vec<f64>, tail_epsilon: f64, tail_span: f64) -> Result<Self> {
        if knots_x.len() != knots_p.len() {
            return Err(Error::Dimension {
                expected: knots_x.len(),
                got: knots_p.len(),
            });
        }
        if knots_x.len() < 2 {
            return Err(Error::Degenerate("an ECDF needs at least 2 knots".into()));
        }
        if !(0.0..0.5).contains(&tail_epsilon) {
            return Err(Error::InvalidInput(format!(
                "tail_epsilon {tail_epsilon} outside [0, 0.5)"
            )));
        }
        if !(tail_span.is_finite() && tail_span > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tail_span must be positive, got {tail_span}"
            )));
        }
        let finite = knots_x.iter().chain(&knots_p).all(|v| v.is_finite());
        let increasing = knots_x.windows(2).all(|w| w[0] < w[1]) && knots_p.windows(2).all(|w| w[0] < w[1]);
        if !finite || !increasing {
            return Err(Error::InvalidInput(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        if knots_p[0] < tail_epsilon || knots_p[knots_p.len() - 1] > 1.0 - tail_epsilon {
            return Err(Error::InvalidInput(
                "knot probabilities must lie within the tail bounds".into(),
            ));
        }
        Ok(Self {
            knots_x,
            knots_p,
            tail_epsilon,
            tail_span,
        })
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_p(&self) -> &[f64] {
        &self.knots_p
    }

    pub fn tail_epsilon(&self) -> f64 {
        self.tail_epsilon
    }

    pub fn tail_span(&self) -> f64 {
        self.tail_span
    }

    pub fn min_observed(&self) -> f64 {
        self.knots_x[0]
    }

    pub fn max_observed(&self) -> f64 {
        self.knots_x[self.knots_x.len() - 1]
    }

    /// The extended domain `[min - tail_span, max + tail_span]` on which the
    /// CDF is strictly increasing (for `tail_epsilon > 0`).
    pub fn support(&self) -> (f64, f64) {
        (
            self.min_observed() - self.tail_span,
            self.max_observed() + self.tail_span,
        )
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (x0, p0) = (self.knots_x[0], self.knots_p[0]);
        let last = self.knots_x.len() - 1;
        let (xl, pl) = (self.knots_x[last], self.knots_p[last]);
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= x0 {
            let t = (x - (x0 - self.tail_span)) / self.tail_span;
            return p0 * t.clamp(0.0, 1.0);
        }
        if x >= xl {
            let t = (x - xl) / self.tail_span;
            return pl + (1.0 - pl) * t.clamp(0.0, 1.0);
        }
        // First knot strictly above x; x0 < x < xl so 1 <= hi <= last.
        let hi = self.knots_x.partition_point(|k| *k <= x);
        let lo = hi - 1;
        let t = (x - self.knots_x[lo]) / (self.knots_x[hi] - self.knots_x[lo]);
        self.knots_p[lo] + t * (self.knots_p[hi] - self.knots_p[lo])
    }

    /// `1 - cdf(x)`.
    pub fn score(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// The loss whose CDF value is `p`, inverting the piecewise-linear map.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (x0, p0) = (self.knots_x[0], self.knots_p[0]);
        let last = self.knots_x.len() - 1;
        let (xl, pl) = (self.knots_x[last], self.knots_p[last]);
        if p <= p0 {
            if p0 == 0.0 {
                return x0;
            }
            return x0 - self.tail_span + self.tail_span * p / p0;
        }
        if p >= pl {
            if pl == 1.0 {
                return xl;
            }
            return xl + self.tail_span * (p - pl) / (1.0 - pl);
        }
        let hi = self.knots_p.partition_point(|k| *k <= p);
        let lo = hi - 1;
        let t = (p - self.knots_p[lo]) / (self.knots_p[hi] - self.knots_p[lo]);
        self.knots_x[lo] + t * (self.knots_x[hi] - self.knots_x[lo])
    }
}

/// Uniform quantile thinning: for each of `limit` evenly spaced probability
/// levels keep the first knot at or above it. Endpoints are always kept.
fn thin(knots_x: &[f64], knots_p: &[f64], limit: usize) -> (Vec<f64>, Vec<f64>) {
    let (p0, pl) = (knots_p[0], knots_p[knots_p.len() - 1]);
    let mut keep: Vec<usize> = Vec::with_capacity(limit);
    for level in 0..limit {
        let q = p0 + (pl - p0) * level as f64 / (limit - 1) as f64;
        let idx = knots_p.partition_point(|p| *p < q).min(knots_p.len() - 1);
        if keep.last() != Some(&idx) {
            keep.push(idx);
        }
    }
    if keep.last() != Some(&(knots_p.len() - 1)) {
        keep.push(knots_p.len() - 1);
    }
    (
        keep.iter().map(|&i| knots_x[i]).collect(),
        keep.iter().map(|&i| knots_p[i]).collect(),
    )
}

/// Convenience wrapper using the default tail span.
pub fn build_ecdf(losses: &[f64], tail_epsilon: f64, tail_span: Option<f64>) -> Result<SmoothedEcdf> {
    SmoothedEcdf::build(losses, tail_epsilon, tail_span)
}

/// One smoothed ECDF per objective of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTransform {
    pub problem_name: String,
    pub sample_count: usize,
    pub seed: u64,
    pub tail_epsilon: f64,
    pub per_objective: Vec<SmoothedEcdf>,
}

impl ScoreTransform {
    pub fn objective_count(&self) -> usize {
        self.per_objective.len()
    }

    /// Maps losses to scores, `1 - cdf_i(loss_i)` per objective.
    pub fn score(&self, objectives: &[f64]) -> Result<ScoreVector> {
        if objectives.len() != self.per_objective.len() {
            return Err(Error::Dimension {
                expected: self.per_objective.len(),
                got: objectives.len(),
            });
        }
        Ok(ScoreVector(
            self.per_objective
                .iter()
                .zip(objectives)
                .map(|(e, &f)| e.score(f))
                .collect(),
        ))
    }

    /// Content hash of the knots and tail parameters.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.problem_name.as_bytes());
        for e in &self.per_objective {
            h.update(e.tail_epsilon.to_le_bytes());
            h.update(e.tail_span.to_le_bytes());
            for v in e.knots_x.iter().chain(&e.knots_p) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }
}

pub fn score(transform: &ScoreTransform, objectives: &ObjectiveVector) -> Result<ScoreVector> {
    transform.score(objectives)
}

/// The loss with score `s` under `ecdf`.
pub fn inverse_score(ecdf: &SmoothedEcdf, s: f64) -> f64 {
    ecdf.quantile(1.0 - s)
}

/// Evaluates `problem` on `n_samples` uniform decision vectors and builds one
/// smoothed ECDF per objective from the marginal losses.
pub fn build_transform(problem: &Problem, n_samples: usize, seed: u64, tail_epsilon: f64) -> Result<ScoreTransform> {
    if n_samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n_samples}")));
    }
    let xs = sample_decision_space(problem, n_samples, seed)?;
    let objectives = xs.par_iter().map(|x| problem.evaluate(x)).collect::<Result<Vec<_>>>()?;
    let k = problem.objective_count();
    let per_objective = (0..k)
        .into_par_iter()
        .map(|i| {
            let losses: Vec<f64> = objectives.iter().map(|o| o[i]).collect();
            SmoothedEcdf::build(&losses, tail_epsilon, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreTransform {
        problem_name: problem.name().to_string(),
        sample_count: n_samples,
        seed,
        tail_epsilon,
        per_objective,
    })
}
