//! Trade-off error metrics, quantile tables and score-space reports.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::DirectConfig;
use crate::ecdf::ScoreTransform;
use crate::error::{Error, Result};
use crate::pareto::{dominates, Histogram, ParetoArchive, SolutionRecord};
use crate::prefnet::{corrected_solve, max_normalize, BijectionDataset, CorrectionModel};
use crate::problem::Problem;
use crate::scalarize::{sample_preferences, solve_for_preference, PreferenceVector, Scalarizer, ScalarizerKind};
use crate::seeded_rng;

/// 0%, 10%, ..., 100%.
pub const QUANTILE_LEVELS: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub const METHOD_ORG: &str = "org";
pub const METHOD_CORR: &str = "corr";
pub const METHOD_ONLINE: &str = "online";

/// Mean absolute componentwise difference of the max-normalized vectors.
pub fn trade_off_error(desired: &[f64], obtained: &[f64]) -> Result<f64> {
    if desired.len() != obtained.len() {
        return Err(Error::Dimension {
            expected: desired.len(),
            got: obtained.len(),
        });
    }
    let d = max_normalize(desired)?;
    let o = max_normalize(obtained)?;
    Ok(d.iter().zip(&o).map(|(a, b)| (a - b).abs()).sum::<f64>() / d.len() as f64)
}

/// Type-7 empirical quantile (linear between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    if level <= 0.0 {
        return sorted[0];
    }
    if level >= 1.0 {
        return sorted[n - 1];
    }
    let h = (n - 1) as f64 * level;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodErrors {
    pub label: String,
    pub per_solution_mae: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl MethodErrors {
    pub fn median(&self) -> f64 {
        self.quantiles[5]
    }

    pub fn max(&self) -> f64 {
        self.quantiles[10]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub levels: Vec<f64>,
    pub methods: Vec<MethodErrors>,
}

impl TradeoffReport {
    pub fn method(&self, label: &str) -> Option<&MethodErrors> {
        self.methods.iter().find(|m| m.label == label)
    }

    pub fn method_labels(&self) -> Vec<&str> {
        self.methods.iter().map(|m| m.label.as_str()).collect()
    }
}

/// Quantiles at 0%, 10%, ..., 100% for each labelled error sample.
pub fn quantile_table(errors: &[(&str, Vec<f64>)]) -> Result<TradeoffReport> {
    let mut methods = Vec::with_capacity(errors.len());
    for (label, values) in errors {
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("no errors for method `{label}`")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite error for method `{label}`")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        methods.push(MethodErrors {
            label: label.to_string(),
            per_solution_mae: values.clone(),
            quantiles: QUANTILE_LEVELS.iter().map(|&l| quantile_sorted(&sorted, l)).collect(),
        });
    }
    Ok(TradeoffReport {
        levels: QUANTILE_LEVELS.to_vec(),
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveGrid {
    pub losses: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityDemo {
    pub objectives: Vec<ObjectiveGrid>,
    /// Scores a uniform objective would give along the same grid, from 1 to 0.
    pub ideal: Vec<f64>,
}

/// Maps an evenly spaced loss grid from each objective's observed minimum to
/// maximum into score space.
pub fn homogeneity_demo(transform: &ScoreTransform, grid: usize) -> Result<HomogeneityDemo> {
    if grid < 2 {
        return Err(Error::InvalidInput("grid needs at least 2 points".into()));
    }
    let steps = (grid - 1) as f64;
    let objectives = transform
        .per_objective
        .iter()
        .map(|e| {
            let (lo, hi) = (e.min_observed(), e.max_observed());
            let losses: Vec<f64> = (0..grid)
                .map(|i| {
                    if i == grid - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / steps
                    }
                })
                .collect();
            let scores = losses.iter().map(|&x| e.score(x)).collect();
            ObjectiveGrid { losses, scores }
        })
        .collect();
    let ideal = (0..grid).map(|i| 1.0 - i as f64 / steps).collect();
    Ok(HomogeneityDemo { objectives, ideal })
}

/// Score gained on `objective` by improving its loss from `worse` to `better`.
pub fn score_gain(transform: &ScoreTransform, objective: usize, better: f64, worse: f64) -> Result<f64> {
    let e = transform.per_objective.get(objective).ok_or(Error::Dimension {
        expected: transform.objective_count(),
        got: objective + 1,
    })?;
    Ok(e.score(better) - e.score(worse))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDensity {
    pub i: usize,
    pub j: usize,
    /// `bins x bins` counts of `(s_i, s_j)` over `[0, 1]^2`, row-major in `s_i`.
    pub joint: Vec<Vec<usize>>,
    pub ratio: Histogram,
    /// Records skipped from the ratio histogram because `s_j < 1e-12`.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffDensity {
    pub bins: usize,
    pub efficient_count: usize,
    pub pairs: Vec<PairDensity>,
}

/// Joint and ratio histograms of score pairs over the efficient records.
pub fn tradeoff_density(archive: &ParetoArchive, pairs: &[(usize, usize)], bins: usize) -> Result<TradeoffDensity> {
    if archive.is_empty() {
        return Err(Error::InvalidInput("empty archive".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("need at least one bin".into()));
    }
    let efficient: Vec<&SolutionRecord> = archive.efficient().collect();
    let k = efficient.first().map_or(0, |r| r.scores.len());
    let bin_of = |s: f64| ((s.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i >= k || j >= k {
            return Err(Error::Dimension {
                expected: k,
                got: i.max(j) + 1,
            });
        }
        let mut joint = vec![vec![0usize; bins]; bins];
        let mut ratios = Vec::with_capacity(efficient.len());
        let mut excluded = 0;
        for r in &efficient {
            let (si, sj) = (r.scores[i], r.scores[j]);
            joint[bin_of(si)][bin_of(sj)] += 1;
            if sj < 1e-12 {
                excluded += 1;
            } else {
                ratios.push(si / sj);
            }
        }
        out.push(PairDensity {
            i,
            j,
            joint,
            ratio: Histogram::from_values(&ratios, bins)?,
            excluded,
        });
    }
    Ok(TradeoffDensity {
        bins,
        efficient_count: efficient.len(),
        pairs: out,
    })
}

/// Preferences drawn from the observed trade-offs: resample an efficient
/// record's scores, jitter each component uniformly by up to half of a
/// `1 / bins` score bin, and normalize to sum 1.
pub fn sample_feasible_preferences(
    archive: &ParetoArchive,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<PreferenceVector>> {
    let efficient: Vec<&SolutionRecord> = archive.efficient().collect();
    if efficient.len() < 10 {
        return Err(Error::InsufficientRecords {
            needed: 10,
            available: efficient.len(),
        });
    }
    if bins == 0 {
        return Err(Error::InvalidInput("need at least one bin".into()));
    }
    let half_bin = 0.5 / bins as f64;
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let r = efficient.choose(&mut rng).expect("non-empty");
        let jittered: Vec<f64> = r
            .scores
            .iter()
            .map(|s| (s + rng.gen_range(-half_bin..=half_bin)).max(1e-6))
            .collect();
        let p = PreferenceVector::new(jittered)?.sum_normalized();
        if efficient.iter().any(|e| e.preference.sum_normalized() == p) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleProbeResult {
    pub records: Vec<SolutionRecord>,
    /// `|p_c - s_c|` per record and component, both max-normalized.
    pub deviations: Vec<Vec<f64>>,
    pub component_medians: Vec<f64>,
    pub overall_median: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 0.5)
}

/// Solves each (believed feasible) preference and measures how far the
/// obtained trade-off lands from it, per component.
pub fn feasibility_probe(
    problem: &Problem,
    transform: &Arc<ScoreTransform>,
    prefs: &[PreferenceVector],
    kind: ScalarizerKind,
    config: &DirectConfig,
) -> Result<FeasibleProbeResult> {
    if prefs.is_empty() {
        return Err(Error::InvalidInput("no preferences to probe".into()));
    }
    let scalarizer = Scalarizer::of_kind(kind, Arc::clone(transform));
    let records = prefs
        .par_iter()
        .map(|w| solve_for_preference(problem, w, &scalarizer, transform, config))
        .collect::<Result<Vec<_>>>()?;
    let mut deviations = Vec::with_capacity(records.len());
    for r in &records {
        let p = max_normalize(&r.preference)?;
        let s = max_normalize(&r.scores)?;
        deviations.push(p.iter().zip(&s).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
    }
    let k = problem.objective_count();
    let component_medians = (0..k)
        .map(|c| median(&deviations.iter().map(|d| d[c]).collect::<Vec<_>>()))
        .collect();
    let overall_median = median(&deviations.iter().flatten().copied().collect::<Vec<_>>());
    Ok(FeasibleProbeResult {
        records,
        deviations,
        component_medians,
        overall_median,
    })
}

/// Indices of `records` dominated (in objective space) by any member of `reference`.
pub fn dominated_by(records: &[SolutionRecord], reference: &[SolutionRecord]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        for other in reference {
            if dominates(&other.objectives, &r.objectives)? {
                out.push(i);
                break;
            }
        }
    }
    Ok(out)
}

/// Where the desired trade-offs of an evaluation come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesiredSource {
    /// Score vectors of archive records held out from model training.
    HeldOut,
    /// Fresh preferences uniform on the simplex.
    Simplex,
}

impl std::str::FromStr for DesiredSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heldout" | "held-out" => Ok(Self::HeldOut),
            "simplex" => Ok(Self::Simplex),
            other => Err(Error::InvalidInput(format!("unknown desired source `{other}`"))),
        }
    }
}

/// Desired trade-offs (max-normalized) for an evaluation run.
pub fn desired_tradeoffs(
    archive: &ParetoArchive,
    dataset: &BijectionDataset,
    source: DesiredSource,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidInput("held-out set must not be empty".into()));
    }
    match source {
        DesiredSource::HeldOut => {
            if dataset.validation.len() < n {
                return Err(Error::InsufficientRecords {
                    needed: n,
                    available: dataset.validation.len(),
                });
            }
            let mut pool = dataset.validation.clone();
            pool.shuffle(&mut seeded_rng(seed));
            pool.truncate(n);
            pool.iter()
                .map(|&i| max_normalize(&archive.records[dataset.source[i]].scores))
                .collect()
        }
        DesiredSource::Simplex => {
            let k = archive.records.first().map_or(0, |r| r.scores.len());
            sample_preferences(k, n, seed)?
                .iter()
                .map(|p| max_normalize(p))
                .collect()
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodComparison {
    pub desired: Vec<Vec<f64>>,
    pub org: Vec<SolutionRecord>,
    pub corr: Vec<SolutionRecord>,
    pub online: Vec<SolutionRecord>,
    pub report: TradeoffReport,
}

/// Solves every desired trade-off three ways and tabulates the errors:
/// `org` uses it directly as raw weights, `online` as score weights, and
/// `corr` passes it through the correction model first and solves with
/// `corr_kind`.
pub fn compare_methods(
    problem: &Problem,
    transform: &Arc<ScoreTransform>,
    model: &CorrectionModel,
    desired: &[Vec<f64>],
    corr_kind: ScalarizerKind,
    config: &DirectConfig,
) -> Result<MethodComparison> {
    if desired.is_empty() {
        return Err(Error::InvalidInput("no desired trade-offs".into()));
    }
    let raw = Scalarizer::raw();
    let online = Scalarizer::score(Arc::clone(transform));
    let corrected = Scalarizer::of_kind(corr_kind, Arc::clone(transform));
    let solve = |d: &Vec<f64>| -> Result<(SolutionRecord, SolutionRecord, SolutionRecord)> {
        let w = PreferenceVector::new(d.clone())?.sum_normalized();
        let org = solve_for_preference(problem, &w, &raw, transform, config)?;
        let onl = solve_for_preference(problem, &w, &online, transform, config)?;
        let corr = corrected_solve(model, d, problem, transform, &corrected, config)?;
        Ok((org, corr, onl))
    };
    let solved = desired.par_iter().map(solve).collect::<Result<Vec<_>>>()?;
    let mut org = Vec::with_capacity(solved.len());
    let mut corr = Vec::with_capacity(solved.len());
    let mut onl = Vec::with_capacity(solved.len());
    for (a, b, c) in solved {
        org.push(a);
        corr.push(b);
        onl.push(c);
    }
    let errors = |recs: &[SolutionRecord]| -> Result<Vec<f64>> {
        desired
            .iter()
            .zip(recs)
            .map(|(d, r)| trade_off_error(d, &r.scores))
            .collect()
    };
    let report = quantile_table(&[
        (METHOD_ORG, errors(&org)?),
        (METHOD_CORR, errors(&corr)?),
        (METHOD_ONLINE, errors(&onl)?),
    ])?;
    Ok(MethodComparison {
        desired: desired.to_vec(),
        org,
        corr,
        online: onl,
        report,
    })
}
