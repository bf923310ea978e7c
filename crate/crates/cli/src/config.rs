//! Run configuration: a TOML file overlaid with command-line flags.

use std::path::PathBuf;

use scoremap::analysis::DesiredSource;
use scoremap::direct::DirectConfig;
use scoremap::prefnet::TrainConfig;
use scoremap::scalarize::ScalarizerKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// One seed per pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sample: u64,
    pub ecdf: u64,
    pub front: u64,
    pub train: u64,
    pub correct: u64,
    pub evaluate: u64,
    pub analyze: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_base(0)
    }
}

impl Seeds {
    /// Distinct consecutive seeds starting at `base`.
    pub fn from_base(base: u64) -> Self {
        let s = |i: u64| base.wrapping_add(i);
        Self {
            sample: s(0),
            ecdf: s(1),
            front: s(2),
            train: s(3),
            correct: s(4),
            evaluate: s(5),
            analyze: s(6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scalarizers {
    /// Used to build the preference-sweep front.
    pub front: ScalarizerKind,
    /// Used by the corrected method in `correct` and `evaluate`.
    pub corrected: ScalarizerKind,
    /// Used by the feasibility probe in `analyze`.
    pub probe: ScalarizerKind,
}

impl Default for Scalarizers {
    fn default() -> Self {
        Self {
            front: ScalarizerKind::Raw,
            corrected: ScalarizerKind::Raw,
            probe: ScalarizerKind::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub out: PathBuf,
    /// Decision vectors written by `sample`.
    pub sample_count: usize,
    pub ecdf_samples: usize,
    pub tail_epsilon: f64,
    pub front_prefs: usize,
    /// Share of the efficient records used to train the correction model.
    pub train_fraction: f64,
    /// Desired trade-offs per comparison run.
    pub heldout: usize,
    pub desired_source: DesiredSource,
    pub density_bins: usize,
    pub probe_count: usize,
    pub homogeneity_grid: usize,
    pub direct: DirectConfig,
    pub train: TrainConfig,
    pub seeds: Seeds,
    pub scalarizer: Scalarizers,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "viennet".into(),
            out: PathBuf::from("run"),
            sample_count: 1000,
            ecdf_samples: 100_000,
            tail_epsilon: scoremap::ecdf::DEFAULT_TAIL_EPSILON,
            front_prefs: 2000,
            train_fraction: 0.05,
            heldout: 200,
            desired_source: DesiredSource::HeldOut,
            density_bins: 20,
            probe_count: 100,
            homogeneity_grid: 101,
            direct: DirectConfig::default(),
            train: TrainConfig::default(),
            seeds: Seeds::default(),
            scalarizer: Scalarizers::default(),
        }
    }
}

/// Flag values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scalarizer: Option<ScalarizerKind>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(seed) = o.seed {
            self.seeds = Seeds::from_base(seed);
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(kind) = o.scalarizer {
            self.scalarizer = Scalarizers {
                front: kind,
                corrected: kind,
                probe: kind,
            };
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        scoremap::problem::lookup_problem(&self.problem).map_err(|e| bad(e.to_string()))?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(bad(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 0.5) {
            return Err(bad(format!(
                "tail_epsilon must lie in (0, 0.5), got {}",
                self.tail_epsilon
            )));
        }
        let at_least = |name: &str, v: usize, min: usize| {
            if v < min {
                Err(bad(format!("{name} must be at least {min}, got {v}")))
            } else {
                Ok(())
            }
        };
        at_least("sample_count", self.sample_count, 1)?;
        at_least("ecdf_samples", self.ecdf_samples, 2)?;
        at_least("front_prefs", self.front_prefs, 2)?;
        at_least("heldout", self.heldout, 1)?;
        at_least("density_bins", self.density_bins, 1)?;
        at_least("probe_count", self.probe_count, 1)?;
        at_least("homogeneity_grid", self.homogeneity_grid, 2)?;
        at_least("train.hidden_units", self.train.hidden_units, 1)?;
        at_least("train.window", self.train.window, 1)?;
        if !(self.train.initial_step > 0.0 && self.train.step_growth >= 1.0) {
            return Err(bad(
                "train.initial_step must be positive and train.step_growth at least 1",
            ));
        }
        self.direct.validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }
}
