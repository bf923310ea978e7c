//! Weighted-sum scalarization over raw losses or over scores.

use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::direct::{minimize, DirectConfig};
use crate::ecdf::ScoreTransform;
use crate::error::{Error, Result};
use crate::pareto::SolutionRecord;
use crate::problem::Problem;
use crate::seeded_rng;

/// Strictly positive scalarization weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PreferenceVector(Vec<f64>);

impl PreferenceVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("empty preference".into()));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "preference weights must be positive and finite, got {bad}"
            )));
        }
        Ok(Self(weights))
    }

    /// Scaled to sum 1.
    pub fn sum_normalized(&self) -> Self {
        let total: f64 = self.0.iter().sum();
        Self(self.0.iter().map(|w| w / total).collect())
    }

    /// Scaled so the largest weight is exactly 1.
    pub fn max_normalized(&self) -> Self {
        let max = self.0.iter().copied().fold(f64::MIN, f64::max);
        Self(self.0.iter().map(|w| if *w == max { 1.0 } else { w / max }).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PreferenceVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PreferenceVector {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<PreferenceVector> for Vec<f64> {
    fn from(p: PreferenceVector) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarizerKind {
    /// `sum w_i f_i(x)`, minimized.
    Raw,
    /// `-sum w_i S_i(x)`, minimized.
    Score,
}

impl std::str::FromStr for ScalarizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "score" => Ok(Self::Score),
            other => Err(Error::InvalidInput(format!(
                "unknown scalarizer `{other}` (expected raw or score)"
            ))),
        }
    }
}

impl std::fmt::Display for ScalarizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::Score => "score",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scalarizer {
    kind: ScalarizerKind,
    transform: Option<Arc<ScoreTransform>>,
}

impl Scalarizer {
    pub fn raw() -> Self {
        Self {
            kind: ScalarizerKind::Raw,
            transform: None,
        }
    }

    pub fn score(transform: Arc<ScoreTransform>) -> Self {
        Self {
            kind: ScalarizerKind::Score,
            transform: Some(transform),
        }
    }

    /// Builds a scalarizer of `kind`; the transform is only kept for score kind.
    pub fn of_kind(kind: ScalarizerKind, transform: Arc<ScoreTransform>) -> Self {
        match kind {
            ScalarizerKind::Raw => Self::raw(),
            ScalarizerKind::Score => Self::score(transform),
        }
    }

    pub fn kind(&self) -> ScalarizerKind {
        self.kind
    }
}

/// The scalar function to minimize for preference `weights`. Evaluation
/// failures surface as NaN, which the optimizer rejects.
pub fn scalarize<'a>(
    scalarizer: &'a Scalarizer,
    problem: &'a Problem,
    weights: &'a PreferenceVector,
) -> Result<impl Fn(&[f64]) -> f64 + Send + Sync + 'a> {
    let k = problem.objective_count();
    if weights.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: weights.len(),
        });
    }
    let transform = match scalarizer.kind {
        ScalarizerKind::Raw => None,
        ScalarizerKind::Score => {
            let t = scalarizer
                .transform
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("score scalarizer needs a transform".into()))?;
            if t.objective_count() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: t.objective_count(),
                });
            }
            Some(t)
        }
    };
    Ok(move |x: &[f64]| {
        let Ok(losses) = problem.evaluate(x) else {
            return f64::NAN;
        };
        match transform {
            None => losses.iter().zip(weights.iter()).map(|(f, w)| w * f).sum(),
            Some(t) => -t
                .per_objective
                .iter()
                .zip(losses.iter())
                .zip(weights.iter())
                .map(|((e, f), w)| w * e.score(*f))
                .sum::<f64>(),
        }
    })
}

/// Minimizes the scalarized problem with DIRECT-L and scores the result.
pub fn solve_for_preference(
    problem: &Problem,
    weights: &PreferenceVector,
    scalarizer: &Scalarizer,
    transform: &ScoreTransform,
    config: &DirectConfig,
) -> Result<SolutionRecord> {
    let f = scalarize(scalarizer, problem, weights)?;
    let result = minimize(f, problem.bounds(), config)?;
    let objectives = problem.evaluate(&result.best_x)?;
    let scores = transform.score(&objectives)?;
    Ok(SolutionRecord::new(weights.clone(), result.best_x, objectives, scores))
}

/// `n` preferences uniform on the open unit simplex (flat Dirichlet via
/// normalized exponentials).
pub fn sample_preferences(k: usize, n: usize, seed: u64) -> Result<Vec<PreferenceVector>> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidInput(
            "need at least one preference of positive dimension".into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        let weights: Vec<f64> = draws.iter().map(|d| d / total).collect();
        if weights.iter().all(|w| *w >= 1e-9) {
            out.push(PreferenceVector(weights));
        }
    }
    Ok(out)
}
