//! Problem definitions, vector newtypes and box-bounded decision spaces.
//!
//! A [`Problem`] bundles a deterministic evaluator `x -> (f_1(x), .., f_k(x))`
//! with the box it is defined on. The only built-in problem is the Viennet
//! function on `[-4, 4]^2`; others can be registered at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                Self(values)
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self(values)
            }
        }
    };
}

real_vector!(
    /// A point in the decision space.
    DecisionVector
);
real_vector!(
    /// Raw objective losses, one per objective (minimized).
    ObjectiveVector
);

/// Per-dimension box constraints `lower[i] < upper[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidInput("bounds must have at least one dimension".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "dimension {i}: lower {lo} must be finite and below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> DecisionVector {
        DecisionVector(
            unit.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(u, (lo, hi))| (lo + u * (hi - lo)).clamp(*lo, *hi))
                .collect(),
        )
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }
}

type Evaluator = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A box-constrained multi-objective minimization problem with `k >= 2`
/// objectives.
#[derive(Clone)]
pub struct Problem {
    name: String,
    objective_count: usize,
    bounds: BoxBounds,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("decision_dim", &self.decision_dim())
            .field("objective_count", &self.objective_count)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl Problem {
    pub fn new<F>(name: impl Into<String>, objective_count: usize, bounds: BoxBounds, evaluator: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if objective_count < 2 {
            return Err(Error::InvalidInput(format!(
                "a multi-objective problem needs at least 2 objectives, got {objective_count}"
            )));
        }
        Ok(Self {
            name: name.into(),
            objective_count,
            bounds,
            evaluator: Arc::new(evaluator),
        })
    }

    /// The built-in Viennet problem on `[-4, 4]^2`.
    pub fn viennet() -> Self {
        Self {
            name: "viennet".into(),
            objective_count: 3,
            bounds: BoxBounds::uniform(2, -4.0, 4.0).expect("static bounds"),
            evaluator: Arc::new(|x: &[f64]| viennet_unchecked(x[0], x[1]).to_vec()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn decision_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn objective_count(&self) -> usize {
        self.objective_count
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    /// Evaluates all objectives at `x`, rejecting out-of-box points and
    /// non-finite losses.
    pub fn evaluate(&self, x: &[f64]) -> Result<ObjectiveVector> {
        if x.len() != self.decision_dim() {
            return Err(Error::Dimension {
                expected: self.decision_dim(),
                got: x.len(),
            });
        }
        if !self.bounds.contains(x) {
            return Err(Error::Domain { point: x.to_vec() });
        }
        let losses = (self.evaluator)(x);
        if losses.len() != self.objective_count {
            return Err(Error::Dimension {
                expected: self.objective_count,
                got: losses.len(),
            });
        }
        if let Some(bad) = losses.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                point: x.to_vec(),
                value: *bad,
            });
        }
        Ok(ObjectiveVector(losses))
    }
}

fn viennet_unchecked(x1: f64, x2: f64) -> [f64; 3] {
    let r2 = x1 * x1 + x2 * x2;
    let f1 = 0.5 * r2 + r2.sin();
    let a = 3.0 * x1 - 2.0 * x2 + 4.0;
    let b = x1 - x2 + 1.0;
    let f2 = a * a / 8.0 + b * b / 27.0 + 15.0;
    let f3 = 1.0 / (r2 + 1.0) - 1.1 * (-r2).exp();
    [f1, f2, f3]
}

/// The three Viennet objectives at `x`, defined on `[-4, 4]^2`.
pub fn viennet(x: &[f64]) -> Result<ObjectiveVector> {
    if x.len() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: x.len(),
        });
    }
    if !x.iter().all(|v| (-4.0..=4.0).contains(v)) {
        return Err(Error::Domain { point: x.to_vec() });
    }
    Ok(ObjectiveVector(viennet_unchecked(x[0], x[1]).to_vec()))
}

/// Draws `n` points i.i.d. uniform in the problem's box.
pub fn sample_decision_space(problem: &Problem, n: usize, seed: u64) -> Result<Vec<DecisionVector>> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let bounds = problem.bounds();
    Ok((0..n)
        .map(|_| {
            DecisionVector(
                bounds
                    .lower()
                    .iter()
                    .zip(bounds.upper())
                    .map(|(lo, hi)| rng.gen_range(*lo..*hi))
                    .collect(),
            )
        })
        .collect())
}

fn registry() -> &'static RwLock<BTreeMap<String, Problem>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, Problem>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map = BTreeMap::new();
        let viennet = Problem::viennet();
        map.insert(viennet.name().to_string(), viennet);
        RwLock::new(map)
    })
}

/// Registers a problem under its name, replacing any previous entry.
pub fn register_problem(problem: Problem) {
    registry()
        .write()
        .expect("problem registry poisoned")
        .insert(problem.name().to_string(), problem);
}

pub fn lookup_problem(name: &str) -> Result<Problem> {
    registry()
        .read()
        .expect("problem registry poisoned")
        .get(name)
        .cloned()
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

pub fn problem_names() -> Vec<String> {
    registry()
        .read()
        .expect("problem registry poisoned")
        .keys()
        .cloned()
        .collect()
}
