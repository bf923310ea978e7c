//! Preference correction: a one-hidden-layer sigmoid network mapping a
//! desired (max-normalized) score vector to the (max-normalized) preference
//! that attains it, trained on solved preference/score pairs.

use std::sync::Arc;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::direct::DirectConfig;
use crate::ecdf::ScoreTransform;
use crate::error::{Error, Result};
use crate::pareto::{ParetoArchive, SolutionRecord};
use crate::problem::Problem;
use crate::scalarize::{solve_for_preference, PreferenceVector, Scalarizer};
use crate::seeded_rng;

pub const SIGMOID: &str = "sigmoid";

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Divides by the largest component; errors if that is not positive.
pub fn max_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::InvalidInput(format!("cannot max-normalize {v:?}")));
    }
    Ok(v.iter().map(|x| if *x == max { 1.0 } else { x / max }).collect())
}

/// Weights are row-major with the bias as the last row:
/// `weights_in` is `(input_dim + 1) x hidden`, `weights_out` is
/// `(hidden + 1) x output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionModel {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub output_dim: usize,
    pub hidden_activation: String,
    pub output_activation: String,
    pub weights_in: Vec<f64>,
    pub weights_out: Vec<f64>,
}

struct Activations {
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl CorrectionModel {
    pub fn zeros(dim: usize, hidden_units: usize) -> Self {
        Self {
            input_dim: dim,
            hidden_units,
            output_dim: dim,
            hidden_activation: SIGMOID.into(),
            output_activation: SIGMOID.into(),
            weights_in: vec![0.0; (dim + 1) * hidden_units],
            weights_out: vec![0.0; (hidden_units + 1) * dim],
        }
    }

    /// Weights uniform in `[-0.5, 0.5]`.
    pub fn random(dim: usize, hidden_units: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut model = Self::zeros(dim, hidden_units);
        for w in model.weights_in.iter_mut().chain(model.weights_out.iter_mut()) {
            *w = rng.gen_range(-0.5..=0.5);
        }
        model
    }

    pub fn parameter_count(&self) -> usize {
        self.weights_in.len() + self.weights_out.len()
    }

    /// Checks shapes, activation names and finiteness (used after loading).
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_units == 0 || self.output_dim == 0 {
            return Err(Error::Parse("model dimensions must be positive".into()));
        }
        if self.hidden_activation != SIGMOID || self.output_activation != SIGMOID {
            return Err(Error::Parse(format!(
                "unsupported activations {}/{}",
                self.hidden_activation, self.output_activation
            )));
        }
        let expect_in = self
            .input_dim
            .checked_add(1)
            .and_then(|n| n.checked_mul(self.hidden_units));
        let expect_out = self
            .hidden_units
            .checked_add(1)
            .and_then(|n| n.checked_mul(self.output_dim));
        if expect_in != Some(self.weights_in.len()) || expect_out != Some(self.weights_out.len()) {
            return Err(Error::Parse("weight array lengths do not match dimensions".into()));
        }
        if !self.weights_in.iter().chain(&self.weights_out).all(|w| w.is_finite()) {
            return Err(Error::Parse("non-finite weight".into()));
        }
        Ok(())
    }

    fn activations(&self, input: &[f64]) -> Activations {
        let (k, h) = (self.input_dim, self.hidden_units);
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let z = self.weights_in[k * h + j] + (0..k).map(|i| input[i] * self.weights_in[i * h + j]).sum::<f64>();
                sigmoid(z)
            })
            .collect();
        let o = self.output_dim;
        let output = (0..o)
            .map(|c| {
                let z =
                    self.weights_out[h * o + c] + (0..h).map(|j| hidden[j] * self.weights_out[j * o + c]).sum::<f64>();
                sigmoid(z)
            })
            .collect();
        Activations { hidden, output }
    }

    /// Raw sigmoid outputs in `(0, 1)`.
    pub fn forward_raw(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: input.len(),
            });
        }
        Ok(self.activations(input).output)
    }

    /// Predicted preference, max-normalized.
    pub fn forward(&self, desired: &[f64]) -> Result<PreferenceVector> {
        let raw = self.forward_raw(desired)?;
        PreferenceVector::new(max_normalize(&raw)?)
    }

    /// Mean over pairs of the summed squared output error.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
        let total: f64 = inputs
            .iter()
            .zip(targets)
            .map(|(x, t)| {
                self.activations(x)
                    .output
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t).powi(2))
                    .sum::<f64>()
            })
            .sum();
        total / inputs.len() as f64
    }

    /// Loss and its gradient by backpropagation; the gradient is laid out as
    /// `weights_in` followed by `weights_out`.
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let (k, h, o) = (self.input_dim, self.hidden_units, self.output_dim);
        let n = inputs.len() as f64;
        let mut grad = vec![0.0; self.parameter_count()];
        let (grad_in, grad_out) = grad.split_at_mut(self.weights_in.len());
        let mut loss = 0.0;
        let mut delta_out = vec![0.0; o];
        for (x, t) in inputs.iter().zip(targets) {
            let a = self.activations(x);
            for c in 0..o {
                let err = a.output[c] - t[c];
                loss += err * err;
                delta_out[c] = 2.0 * err * a.output[c] * (1.0 - a.output[c]) / n;
            }
            for c in 0..o {
                for j in 0..h {
                    grad_out[j * o + c] += delta_out[c] * a.hidden[j];
                }
                grad_out[h * o + c] += delta_out[c];
            }
            for j in 0..h {
                let back: f64 = (0..o).map(|c| delta_out[c] * self.weights_out[j * o + c]).sum();
                let delta_hidden = back * a.hidden[j] * (1.0 - a.hidden[j]);
                for i in 0..k {
                    grad_in[i * h + j] += delta_hidden * x[i];
                }
                grad_in[k * h + j] += delta_hidden;
            }
        }
        (loss / n, grad)
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.weights_in.iter().chain(&self.weights_out).copied().collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let split = self.weights_in.len();
        self.weights_in.copy_from_slice(&params[..split]);
        self.weights_out.copy_from_slice(&params[split..]);
    }
}

/// Normalized `(score -> preference)` pairs with a disjoint train/validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BijectionDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Archive record index behind each pair.
    pub source: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl BijectionDataset {
    pub fn from_pairs(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let inputs = inputs.iter().map(|v| max_normalize(v)).collect::<Result<Vec<_>>>()?;
        let targets = targets.iter().map(|v| max_normalize(v)).collect::<Result<Vec<_>>>()?;
        let n = inputs.len();
        Ok(Self {
            inputs,
            targets,
            source: (0..n).collect(),
            train: (0..n).collect(),
            validation: Vec::new(),
        })
    }

    pub fn train_inputs(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|&i| self.inputs[i].clone()).collect()
    }

    pub fn train_targets(&self) -> Vec<Vec<f64>> {
        self.train.iter().map(|&i| self.targets[i].clone()).collect()
    }
}

/// Pairs every efficient record's normalized scores with its normalized
/// preference and splits off `n_train` random pairs for training.
pub fn make_dataset(archive: &ParetoArchive, n_train: usize, seed: u64) -> Result<BijectionDataset> {
    let efficient: Vec<(usize, &SolutionRecord)> = archive
        .records
        .iter()
        .enumerate()
        .filter(|(i, _)| archive.efficient_mask[*i])
        .collect();
    if n_train == 0 || efficient.len() < n_train {
        return Err(Error::InsufficientRecords {
            needed: n_train.max(1),
            available: efficient.len(),
        });
    }
    let mut inputs = Vec::with_capacity(efficient.len());
    let mut targets = Vec::with_capacity(efficient.len());
    let mut source = Vec::with_capacity(efficient.len());
    for (i, r) in &efficient {
        inputs.push(max_normalize(&r.scores)?);
        targets.push(max_normalize(&r.preference)?);
        source.push(*i);
    }
    let mut order: Vec<usize> = (0..efficient.len()).collect();
    order.shuffle(&mut seeded_rng(seed));
    let validation = order.split_off(n_train);
    Ok(BijectionDataset {
        inputs,
        targets,
        source,
        train: order,
        validation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_units: usize,
    pub max_epochs: usize,
    pub initial_step: f64,
    /// Step multiplier after an accepted epoch.
    pub step_growth: f64,
    /// Converged once the loss improves by less than this over `window` epochs.
    pub tolerance: f64,
    pub window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_units: 5,
            max_epochs: 5000,
            initial_step: 1.0,
            step_growth: 1.05,
            tolerance: 1e-9,
            window: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CorrectionModel,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Loss after each accepted epoch, starting with the initial loss.
    pub history: Vec<f64>,
}

/// Full-batch gradient descent. A step that would raise the loss is
/// rejected and halved; accepted steps grow by `step_growth`, so the
/// recorded loss never increases.
pub fn train(dataset: &BijectionDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.train.is_empty() {
        return Err(Error::InsufficientRecords {
            needed: 1,
            available: 0,
        });
    }
    if config.hidden_units == 0 || config.initial_step.is_nan() || config.initial_step <= 0.0 {
        return Err(Error::InvalidInput(
            "hidden_units and initial_step must be positive".into(),
        ));
    }
    let inputs = dataset.train_inputs();
    let targets = dataset.train_targets();
    let dim = inputs[0].len();
    if inputs.iter().chain(&targets).any(|v| v.len() != dim) {
        return Err(Error::InvalidInput("inconsistent pair dimensions".into()));
    }

    let mut model = CorrectionModel::random(dim, config.hidden_units, config.seed);
    let mut params = model.parameters();
    let (mut loss, mut grad) = model.loss_and_gradient(&inputs, &targets);
    let initial_loss = loss;
    let mut history = vec![loss];
    let mut step = config.initial_step;
    let mut converged = false;
    let mut epochs = 0;

    let mut candidate = model.clone();
    while epochs < config.max_epochs {
        epochs += 1;
        let mut accepted = false;
        // Halve until the step no longer increases the loss.
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            candidate.set_parameters(&trial);
            let (trial_loss, trial_grad) = candidate.loss_and_gradient(&inputs, &targets);
            if trial_loss.is_finite() && trial_loss <= loss + 1e-12 {
                params = trial;
                loss = trial_loss;
                grad = trial_grad;
                step *= config.step_growth;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        history.push(loss);
        if history.len() > config.window {
            let past = history[history.len() - 1 - config.window];
            if past - loss < config.tolerance {
                converged = true;
                break;
            }
        }
    }
    model.set_parameters(&params);
    if !converged {
        warn!(
            "preference model did not converge within {} epochs (loss {loss:.3e})",
            config.max_epochs
        );
    }
    Ok(TrainOutcome {
        model,
        initial_loss,
        final_loss: loss,
        epochs,
        converged,
        history,
    })
}

/// Maps `desired` through the model, sum-normalizes the predicted preference
/// and solves for it.
pub fn corrected_solve(
    model: &CorrectionModel,
    desired: &[f64],
    problem: &Problem,
    transform: &Arc<ScoreTransform>,
    scalarizer: &Scalarizer,
    config: &DirectConfig,
) -> Result<SolutionRecord> {
    let desired = max_normalize(desired)?;
    let preference = model.forward(&desired)?.sum_normalized();
    solve_for_preference(problem, &preference, scalarizer, transform, config)
}
