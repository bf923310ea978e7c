//! Pipeline stages. Each reads its inputs from the output directory, writes
//! its artifacts there and records them in the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use scoremap::analysis::{
    compare_methods, desired_tradeoffs, dominated_by, feasibility_probe, homogeneity_demo, sample_feasible_preferences,
    score_gain, tradeoff_density, MethodComparison,
};
use scoremap::direct::DirectConfig;
use scoremap::ecdf::{build_transform, ScoreTransform};
use scoremap::io::{self, ArchiveMeta};
use scoremap::pareto::{build_front, order_by_total_score, total_score_density, ParetoArchive};
use scoremap::prefnet::{make_dataset, train, BijectionDataset, CorrectionModel, TrainConfig};
use scoremap::problem::{lookup_problem, sample_decision_space, Problem};

use crate::config::{ConfigError, RunConfig};
use crate::manifest::RunManifest;

pub const SAMPLES: &str = "samples.csv";
pub const TRANSFORM_CSV: &str = "transform.csv";
pub const TRANSFORM_JSON: &str = "transform.json";
pub const ARCHIVE_CSV: &str = "archive.csv";
pub const ARCHIVE_JSON: &str = "archive.json";
pub const RANKED_CSV: &str = "ranked.csv";
pub const TOTAL_DENSITY_CSV: &str = "total_density.csv";
pub const MODEL_JSON: &str = "model.json";
pub const DATASET_JSON: &str = "dataset.json";
pub const TRAINING_JSON: &str = "training.json";
pub const CORRECT_QUANTILES: &str = "correct_quantiles.csv";
pub const CORRECT_ERRORS: &str = "correct_errors.csv";
pub const EVALUATE_QUANTILES: &str = "evaluate_quantiles.csv";
pub const EVALUATE_ERRORS: &str = "evaluate_errors.csv";
pub const EVALUATE_JSON: &str = "evaluate.json";
pub const HOMOGENEITY_CSV: &str = "homogeneity.csv";
pub const SCORE_DELTAS_JSON: &str = "score_deltas.json";
pub const PROBE_CSV: &str = "probe.csv";
pub const ANALYSIS_JSON: &str = "analysis.json";

/// Shared state of one command invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub force: bool,
    pub command: &'static str,
    manifest: RunManifest,
}

impl Ctx {
    pub fn new(cfg: RunConfig, force: bool, command: &'static str) -> Result<Self> {
        fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
        let manifest = RunManifest::load_or_new(&cfg.out, &cfg)?;
        Ok(Self {
            cfg,
            force,
            command,
            manifest,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.cfg.out
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// Refuses to clobber existing outputs unless forced.
    fn claim(&self, names: &[&str]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        if let Some(existing) = names.iter().find(|n| self.path(n).exists()) {
            return Err(ConfigError(format!(
                "{} already exists; pass --force to overwrite",
                self.path(existing).display()
            ))
            .into());
        }
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record(&self.cfg.out, name, self.command)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn read(&self, name: &str, producer: &str) -> Result<String> {
        let path = self.path(name);
        if !path.exists() {
            return Err(ConfigError(format!("{} not found; run `{producer}` first", path.display())).into());
        }
        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))
    }

    fn finish(self) -> Result<()> {
        self.manifest.save(&self.cfg.out)
    }

    fn problem(&self) -> Result<Problem> {
        Ok(lookup_problem(&self.cfg.problem)?)
    }

    fn transform(&self) -> Result<Arc<ScoreTransform>> {
        let t = io::parse_transform(&self.read(TRANSFORM_CSV, "ecdf")?, &self.read(TRANSFORM_JSON, "ecdf")?)
            .context("loading transform")?;
        if t.problem_name != self.cfg.problem {
            return Err(ConfigError(format!(
                "transform was built for `{}`, config names `{}`",
                t.problem_name, self.cfg.problem
            ))
            .into());
        }
        Ok(Arc::new(t))
    }

    /// The archive, checked against the transform it was scored with.
    fn archive(&self, transform: &ScoreTransform) -> Result<ParetoArchive> {
        let meta: ArchiveMeta =
            serde_json::from_str(&self.read(ARCHIVE_JSON, "front")?).context("parsing archive metadata")?;
        if meta.transform_id != transform.id() {
            return Err(ConfigError("archive was scored with a different transform; rerun `front`".into()).into());
        }
        io::parse_archive(&self.read(ARCHIVE_CSV, "front")?, &meta.transform_id).context("loading archive")
    }

    fn model(&self) -> Result<CorrectionModel> {
        io::parse_model(&self.read(MODEL_JSON, "correct")?).context("loading model")
    }

    fn dataset(&self) -> Result<BijectionDataset> {
        serde_json::from_str(&self.read(DATASET_JSON, "correct")?).context("parsing dataset")
    }

    fn direct(&self) -> DirectConfig {
        self.cfg.direct.clone()
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> scoremap::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn csv_from_rows(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn numbered(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |i| format!("{prefix}{i}"))
}

pub fn sample(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "sample")?;
    ctx.claim(&[SAMPLES])?;
    let problem = ctx.problem()?;
    let xs = sample_decision_space(&problem, ctx.cfg.sample_count, ctx.cfg.seeds.sample)?;
    let bytes = csv_bytes(|b| io::write_decisions(b, &xs))?;
    ctx.write(SAMPLES, &bytes)?;
    ctx.finish()
}

pub fn ecdf(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "ecdf")?;
    ctx.claim(&[TRANSFORM_CSV, TRANSFORM_JSON])?;
    let problem = ctx.problem()?;
    let t = build_transform(&problem, ctx.cfg.ecdf_samples, ctx.cfg.seeds.ecdf, ctx.cfg.tail_epsilon)?;
    info!("transform {} from {} samples", t.id(), t.sample_count);
    let bytes = csv_bytes(|b| io::write_transform_csv(b, &t))?;
    ctx.write(TRANSFORM_CSV, &bytes)?;
    let mut side = io::transform_sidecar_json(&t)?;
    side.push('\n');
    ctx.write(TRANSFORM_JSON, side.as_bytes())?;
    ctx.finish()
}

pub fn front(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "front")?;
    ctx.claim(&[ARCHIVE_CSV, ARCHIVE_JSON])?;
    let problem = ctx.problem()?;
    let t = ctx.transform()?;
    let kind = ctx.cfg.scalarizer.front;
    let archive = build_front(
        &problem,
        &t,
        ctx.cfg.front_prefs,
        kind,
        &ctx.direct(),
        ctx.cfg.seeds.front,
    )?;
    let meta = ArchiveMeta {
        problem_name: problem.name().to_string(),
        transform_id: archive.transform_id.clone(),
        scalarizer: kind.to_string(),
        seed: ctx.cfg.seeds.front,
        direct: ctx.direct(),
        record_count: archive.len(),
        efficient_count: archive.efficient_count(),
    };
    info!("{} of {} records efficient", meta.efficient_count, meta.record_count);
    let bytes = csv_bytes(|b| io::write_archive_csv(b, &archive))?;
    ctx.write(ARCHIVE_CSV, &bytes)?;
    ctx.write_json(ARCHIVE_JSON, &meta)?;
    ctx.manifest.efficient_fraction = Some(meta.efficient_count as f64 / meta.record_count as f64);
    ctx.finish()
}

pub fn order(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "order")?;
    ctx.claim(&[RANKED_CSV, TOTAL_DENSITY_CSV])?;
    let t = ctx.transform()?;
    let archive = ctx.archive(&t)?;
    let ranked = ParetoArchive::new(order_by_total_score(&archive), archive.transform_id.clone());
    let bytes = csv_bytes(|b| io::write_archive_csv(b, &ranked))?;
    ctx.write(RANKED_CSV, &bytes)?;
    let hist = total_score_density(&archive, ctx.cfg.density_bins)?;
    let bytes = csv_bytes(|b| io::write_histogram(b, &hist))?;
    ctx.write(TOTAL_DENSITY_CSV, &bytes)?;
    if let Some(best) = ranked.records.first() {
        info!(
            "best total score {:.4} at objectives {:?}",
            best.total_score, &*best.objectives
        );
    }
    ctx.finish()
}

#[derive(Serialize)]
struct TrainingSummary {
    train_pairs: usize,
    validation_pairs: usize,
    initial_loss: f64,
    final_loss: f64,
    epochs: usize,
    converged: bool,
}

#[derive(Serialize)]
struct ComparisonSummary {
    desired_source: String,
    count: usize,
    median: BTreeMap<String, f64>,
    max: BTreeMap<String, f64>,
}

fn comparison_artifacts(ctx: &mut Ctx, cmp: &MethodComparison, quantiles: &str, errors: &str) -> Result<()> {
    let bytes = csv_bytes(|b| io::write_quantile_table(b, &cmp.report))?;
    ctx.write(quantiles, &bytes)?;
    let k = cmp.desired.first().map_or(0, Vec::len);
    let mut header: Vec<String> = numbered("d", k).collect();
    header.extend(cmp.report.methods.iter().map(|m| m.label.clone()));
    let rows: Vec<Vec<String>> = cmp
        .desired
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut row: Vec<String> = d.iter().map(|v| format!("{v}")).collect();
            row.extend(cmp.report.methods.iter().map(|m| format!("{}", m.per_solution_mae[i])));
            row
        })
        .collect();
    ctx.write(errors, &csv_from_rows(&header, &rows)?)
}

fn summary(cmp: &MethodComparison, source: &str) -> ComparisonSummary {
    ComparisonSummary {
        desired_source: source.to_string(),
        count: cmp.desired.len(),
        median: cmp
            .report
            .methods
            .iter()
            .map(|m| (m.label.clone(), m.median()))
            .collect(),
        max: cmp.report.methods.iter().map(|m| (m.label.clone(), m.max())).collect(),
    }
}

/// Number of training pairs for `efficient` usable records.
pub fn train_count(efficient: usize, fraction: f64) -> usize {
    ((efficient as f64 * fraction).round() as usize).clamp(1, efficient.max(1))
}

pub fn correct(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "correct")?;
    ctx.claim(&[
        MODEL_JSON,
        DATASET_JSON,
        TRAINING_JSON,
        CORRECT_QUANTILES,
        CORRECT_ERRORS,
    ])?;
    let problem = ctx.problem()?;
    let t = ctx.transform()?;
    let archive = ctx.archive(&t)?;
    let n_train = train_count(archive.efficient_count(), ctx.cfg.train_fraction);
    let dataset = make_dataset(&archive, n_train, ctx.cfg.seeds.train)?;
    let train_cfg = TrainConfig {
        seed: ctx.cfg.seeds.train,
        ..ctx.cfg.train.clone()
    };
    let outcome = train(&dataset, &train_cfg)?;
    info!(
        "trained on {} pairs: loss {:.3e} -> {:.3e} in {} epochs",
        dataset.train.len(),
        outcome.initial_loss,
        outcome.final_loss,
        outcome.epochs
    );
    let mut model_json = io::model_to_json(&outcome.model)?;
    model_json.push('\n');
    ctx.write(MODEL_JSON, model_json.as_bytes())?;
    ctx.write_json(DATASET_JSON, &dataset)?;
    ctx.write_json(
        TRAINING_JSON,
        &TrainingSummary {
            train_pairs: dataset.train.len(),
            validation_pairs: dataset.validation.len(),
            initial_loss: outcome.initial_loss,
            final_loss: outcome.final_loss,
            epochs: outcome.epochs,
            converged: outcome.converged,
        },
    )?;

    let n = ctx.cfg.heldout.min(dataset.validation.len());
    if n == 0 {
        log::warn!("no held-out records left; skipping the comparison table");
        return ctx.finish();
    }
    let desired = desired_tradeoffs(
        &archive,
        &dataset,
        scoremap::analysis::DesiredSource::HeldOut,
        n,
        ctx.cfg.seeds.correct,
    )?;
    let cmp = compare_methods(
        &problem,
        &t,
        &outcome.model,
        &desired,
        ctx.cfg.scalarizer.corrected,
        &ctx.direct(),
    )?;
    comparison_artifacts(&mut ctx, &cmp, CORRECT_QUANTILES, CORRECT_ERRORS)?;
    ctx.finish()
}

pub fn evaluate(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "evaluate")?;
    ctx.claim(&[EVALUATE_QUANTILES, EVALUATE_ERRORS, EVALUATE_JSON])?;
    let problem = ctx.problem()?;
    let t = ctx.transform()?;
    let archive = ctx.archive(&t)?;
    let model = ctx.model()?;
    let dataset = ctx.dataset()?;
    let source = ctx.cfg.desired_source;
    let desired = desired_tradeoffs(&archive, &dataset, source, ctx.cfg.heldout, ctx.cfg.seeds.evaluate)?;
    let cmp = compare_methods(
        &problem,
        &t,
        &model,
        &desired,
        ctx.cfg.scalarizer.corrected,
        &ctx.direct(),
    )?;
    for m in &cmp.report.methods {
        info!("{}: median error {:.4}, max {:.4}", m.label, m.median(), m.max());
    }
    comparison_artifacts(&mut ctx, &cmp, EVALUATE_QUANTILES, EVALUATE_ERRORS)?;
    let label = serde_json::to_value(source)?.as_str().unwrap_or_default().to_string();
    ctx.write_json(EVALUATE_JSON, &summary(&cmp, &label))?;
    ctx.finish()
}

#[derive(Serialize)]
struct ScoreDeltas {
    objective: usize,
    /// `(better, worse, score(better) - score(worse))`.
    deltas: Vec<(f64, f64, f64)>,
}

#[derive(Serialize)]
struct AnalysisSummary {
    efficient_count: usize,
    /// Records left out of each ratio histogram for a near-zero denominator.
    ratio_excluded: BTreeMap<String, usize>,
    probe_count: usize,
    probe_component_medians: Vec<f64>,
    probe_overall_median: f64,
    probe_dominated_by_front: usize,
}

/// Loss pairs whose score gap on the second objective is reported.
pub const F2_DELTA_PAIRS: [(f64, f64); 2] = [(50.0, 60.0), (20.0, 30.0)];

pub fn density_csv_name(i: usize, j: usize) -> String {
    format!("ratio_density_s{}_s{}.csv", i + 1, j + 1)
}

pub fn joint_csv_name(i: usize, j: usize) -> String {
    format!("joint_density_s{}_s{}.csv", i + 1, j + 1)
}

pub fn analyze(cfg: RunConfig, force: bool) -> Result<()> {
    let mut ctx = Ctx::new(cfg, force, "analyze")?;
    let problem = ctx.problem()?;
    let k = problem.objective_count();
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let mut outputs: Vec<String> = vec![
        HOMOGENEITY_CSV.into(),
        SCORE_DELTAS_JSON.into(),
        PROBE_CSV.into(),
        ANALYSIS_JSON.into(),
    ];
    for &(i, j) in &pairs {
        outputs.push(density_csv_name(i, j));
        outputs.push(joint_csv_name(i, j));
    }
    ctx.claim(&outputs.iter().map(String::as_str).collect::<Vec<_>>())?;

    let t = ctx.transform()?;
    let archive = ctx.archive(&t)?;
    let bins = ctx.cfg.density_bins;

    let density = tradeoff_density(&archive, &pairs, bins)?;
    for p in &density.pairs {
        let bytes = csv_bytes(|b| io::write_histogram(b, &p.ratio))?;
        ctx.write(&density_csv_name(p.i, p.j), &bytes)?;
        let header = vec![
            format!("s{}_bin", p.i + 1),
            format!("s{}_bin", p.j + 1),
            "count".to_string(),
        ];
        let rows: Vec<Vec<String>> = p
            .joint
            .iter()
            .enumerate()
            .flat_map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(b, c)| vec![a.to_string(), b.to_string(), c.to_string()])
            })
            .collect();
        ctx.write(&joint_csv_name(p.i, p.j), &csv_from_rows(&header, &rows)?)?;
    }

    let demo = homogeneity_demo(&t, ctx.cfg.homogeneity_grid)?;
    let mut header = vec!["grid_index".to_string()];
    for c in 1..=k {
        header.push(format!("f{c}"));
        header.push(format!("s{c}"));
    }
    header.push("ideal".into());
    let rows: Vec<Vec<String>> = (0..ctx.cfg.homogeneity_grid)
        .map(|g| {
            let mut row = vec![g.to_string()];
            for o in &demo.objectives {
                row.push(format!("{}", o.losses[g]));
                row.push(format!("{}", o.scores[g]));
            }
            row.push(format!("{}", demo.ideal[g]));
            row
        })
        .collect();
    ctx.write(HOMOGENEITY_CSV, &csv_from_rows(&header, &rows)?)?;

    let deltas = F2_DELTA_PAIRS
        .iter()
        .map(|&(b, w)| Ok((b, w, score_gain(&t, 1, b, w)?)))
        .collect::<scoremap::Result<Vec<_>>>()?;
    ctx.write_json(SCORE_DELTAS_JSON, &ScoreDeltas { objective: 2, deltas })?;

    let prefs = sample_feasible_preferences(&archive, ctx.cfg.probe_count, bins, ctx.cfg.seeds.analyze)?;
    let probe = feasibility_probe(&problem, &t, &prefs, ctx.cfg.scalarizer.probe, &ctx.direct())?;
    let mut header: Vec<String> = numbered("w", k).collect();
    header.extend(numbered("s", k));
    header.extend(numbered("d", k));
    let rows: Vec<Vec<String>> = probe
        .records
        .iter()
        .zip(&probe.deviations)
        .map(|(r, d)| {
            r.preference
                .iter()
                .chain(r.scores.iter())
                .chain(d)
                .map(|v| format!("{v}"))
                .collect()
        })
        .collect();
    ctx.write(PROBE_CSV, &csv_from_rows(&header, &rows)?)?;
    let front: Vec<_> = archive.efficient().cloned().collect();
    let dominated = dominated_by(&probe.records, &front)?.len();
    ctx.write_json(
        ANALYSIS_JSON,
        &AnalysisSummary {
            efficient_count: density.efficient_count,
            ratio_excluded: density
                .pairs
                .iter()
                .map(|p| (format!("s{}/s{}", p.i + 1, p.j + 1), p.excluded))
                .collect(),
            probe_count: probe.records.len(),
            probe_component_medians: probe.component_medians.clone(),
            probe_overall_median: probe.overall_median,
            probe_dominated_by_front: dominated,
        },
    )?;
    ctx.finish()
}

/// Re-checks every manifest checksum; returns the artifacts that differ.
pub fn verify(dir: &Path) -> Result<Vec<String>> {
    let m = RunManifest::load(dir)?;
    Ok(m.verify(dir))
}
