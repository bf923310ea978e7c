//! CSV and JSON persistence for samples, transforms, archives, models and
//! reports.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit. The `parse_*` functions accept
//! untrusted text and never panic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::TradeoffReport;
use crate::direct::DirectConfig;
use crate::ecdf::{ScoreTransform, ScoreVector, SmoothedEcdf};
use crate::error::{Error, Result};
use crate::pareto::{filter_efficient, Histogram, ParetoArchive, SolutionRecord};
use crate::prefnet::CorrectionModel;
use crate::problem::{DecisionVector, ObjectiveVector};
use crate::scalarize::PreferenceVector;

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: `{field}`")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite value `{field}`")));
    }
    Ok(v)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes())
}

fn header_names(rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

/// Columns named `{prefix}1, {prefix}2, ...` starting at `start`.
fn count_prefixed(headers: &[String], start: usize, prefix: &str) -> usize {
    headers[start..]
        .iter()
        .enumerate()
        .take_while(|(i, h)| **h == format!("{prefix}{}", i + 1))
        .count()
}

// ---------------------------------------------------------------- samples

pub fn write_decisions<W: Write>(out: W, xs: &[DecisionVector]) -> Result<()> {
    let m = xs.first().map_or(0, |x| x.len());
    let mut w = csv::Writer::from_writer(out);
    w.write_record((1..=m).map(|i| format!("x{i}")))?;
    for x in xs {
        w.write_record(x.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_decisions(text: &str) -> Result<Vec<DecisionVector>> {
    let mut rdr = reader(text);
    let headers = header_names(&mut rdr)?;
    let m = count_prefixed(&headers, 0, "x");
    if m == 0 || m != headers.len() {
        return Err(Error::Parse("expected header x1..xm".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != m {
            return Err(Error::Parse(format!("row has {} fields, expected {m}", row.len())));
        }
        out.push(DecisionVector(row.iter().map(parse_f64).collect::<Result<_>>()?));
    }
    Ok(out)
}

// ------------------------------------------------------------- transforms

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSidecar {
    pub problem_name: String,
    pub sample_count: usize,
    pub seed: u64,
    pub tail_epsilon: f64,
    /// Tail width per objective.
    pub tail_span: Vec<f64>,
}

impl TransformSidecar {
    pub fn of(t: &ScoreTransform) -> Self {
        Self {
            problem_name: t.problem_name.clone(),
            sample_count: t.sample_count,
            seed: t.seed,
            tail_epsilon: t.tail_epsilon,
            tail_span: t.per_objective.iter().map(|e| e.tail_span()).collect(),
        }
    }
}

pub fn write_transform_csv<W: Write>(out: W, t: &ScoreTransform) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["objective_index", "knot_x", "knot_p"])?;
    for (i, e) in t.per_objective.iter().enumerate() {
        for (x, p) in e.knots_x().iter().zip(e.knots_p()) {
            w.write_record([i.to_string(), fmt(*x), fmt(*p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn transform_sidecar_json(t: &ScoreTransform) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TransformSidecar::of(t))?)
}

pub fn parse_transform(csv_text: &str, sidecar_json: &str) -> Result<ScoreTransform> {
    let meta: TransformSidecar = serde_json::from_str(sidecar_json)?;
    let mut rdr = reader(csv_text);
    if header_names(&mut rdr)? != ["objective_index", "knot_x", "knot_p"] {
        return Err(Error::Parse("expected header objective_index,knot_x,knot_p".into()));
    }
    let k = meta.tail_span.len();
    let mut knots: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); k];
    for row in rdr.records() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::Parse("knot rows need 3 fields".into()));
        }
        let idx: usize = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad objective index `{}`", &row[0])))?;
        let slot = knots
            .get_mut(idx)
            .ok_or_else(|| Error::Parse(format!("objective index {idx} out of range")))?;
        slot.0.push(parse_f64(&row[1])?);
        slot.1.push(parse_f64(&row[2])?);
    }
    let per_objective = knots
        .into_iter()
        .zip(&meta.tail_span)
        .map(|((xs, ps), span)| SmoothedEcdf::from_knots(xs, ps, meta.tail_epsilon, *span))
        .collect::<Result<Vec<_>>>()?;
    if per_objective.len() < 2 {
        return Err(Error::Parse("a transform needs at least 2 objectives".into()));
    }
    Ok(ScoreTransform {
        problem_name: meta.problem_name,
        sample_count: meta.sample_count,
        seed: meta.seed,
        tail_epsilon: meta.tail_epsilon,
        per_objective,
    })
}

// --------------------------------------------------------------- archives

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMeta {
    pub problem_name: String,
    pub transform_id: String,
    pub scalarizer: String,
    pub seed: u64,
    pub direct: DirectConfig,
    pub record_count: usize,
    pub efficient_count: usize,
}

pub fn write_archive_csv<W: Write>(out: W, archive: &ParetoArchive) -> Result<()> {
    let first = archive
        .records
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot write an empty archive".into()))?;
    let (k, m) = (first.objectives.len(), first.x.len());
    let mut header: Vec<String> = Vec::new();
    header.extend((1..=k).map(|i| format!("w{i}")));
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((1..=k).map(|i| format!("f{i}")));
    header.extend((1..=k).map(|i| format!("s{i}")));
    header.push("total_score".into());
    header.push("efficient".into());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for (r, eff) in archive.records.iter().zip(&archive.efficient_mask) {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.extend(r.preference.iter().map(|v| fmt(*v)));
        row.extend(r.x.iter().map(|v| fmt(*v)));
        row.extend(r.objectives.iter().map(|v| fmt(*v)));
        row.extend(r.scores.iter().map(|v| fmt(*v)));
        row.push(fmt(r.total_score));
        row.push(eff.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses an archive table; the stored efficiency flags must agree with a
/// fresh dominance check.
pub fn parse_archive(csv_text: &str, transform_id: &str) -> Result<ParetoArchive> {
    let mut rdr = reader(csv_text);
    let headers = header_names(&mut rdr)?;
    let k = count_prefixed(&headers, 0, "w");
    let m = count_prefixed(&headers, k, "x");
    if k < 2 || m == 0 {
        return Err(Error::Parse(
            "expected header w1..wk, x1..xm, f1..fk, s1..sk, total_score, efficient".into(),
        ));
    }
    let width = 3 * k + m + 2;
    if headers.len() != width
        || count_prefixed(&headers, k + m, "f") != k
        || count_prefixed(&headers, 2 * k + m, "s") != k
        || headers[width - 2] != "total_score"
        || headers[width - 1] != "efficient"
    {
        return Err(Error::Parse("unexpected archive header".into()));
    }
    let mut records = Vec::new();
    let mut mask = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != width {
            return Err(Error::Parse(format!("row has {} fields, expected {width}", row.len())));
        }
        let nums = row
            .iter()
            .take(width - 1)
            .map(parse_f64)
            .collect::<Result<Vec<f64>>>()?;
        let preference = PreferenceVector::new(nums[..k].to_vec()).map_err(|e| Error::Parse(e.to_string()))?;
        let scores = nums[k + m + k..k + m + 2 * k].to_vec();
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Parse("scores must lie in [0, 1]".into()));
        }
        let record = SolutionRecord {
            preference,
            x: DecisionVector(nums[k..k + m].to_vec()),
            objectives: ObjectiveVector(nums[k + m..k + m + k].to_vec()),
            scores: ScoreVector(scores),
            total_score: nums[width - 2],
        };
        mask.push(match row[width - 1].trim() {
            "true" => true,
            "false" => false,
            other => return Err(Error::Parse(format!("bad efficient flag `{other}`"))),
        });
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::Parse("archive has no records".into()));
    }
    if filter_efficient(&records) != mask {
        return Err(Error::Parse("efficient flags disagree with dominance".into()));
    }
    Ok(ParetoArchive {
        records,
        transform_id: transform_id.to_string(),
        efficient_mask: mask,
    })
}

// ----------------------------------------------------------------- models

pub fn model_to_json(model: &CorrectionModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn parse_model(json: &str) -> Result<CorrectionModel> {
    let model: CorrectionModel = serde_json::from_str(json)?;
    model.validate()?;
    Ok(model)
}

// ---------------------------------------------------------------- reports

pub fn write_histogram<W: Write>(out: W, h: &Histogram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (lo, hi, c) in h.rows() {
        w.write_record([fmt(lo), fmt(hi), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per quantile level (`0%` .. `100%`), one column per method.
pub fn write_quantile_table<W: Write>(out: W, report: &TradeoffReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["quantile".to_string()];
    header.extend(report.methods.iter().map(|m| m.label.clone()));
    w.write_record(&header)?;
    for (i, level) in report.levels.iter().enumerate() {
        let mut row = vec![format!("{}%", (level * 100.0).round() as u32)];
        row.extend(report.methods.iter().map(|m| fmt(m.quantiles[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(out: W, trace: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eval_index", "best_f"])?;
    for (i, f) in trace {
        w.write_record([i.to_string(), fmt(*f)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::quantile_table;
    use crate::ecdf::build_transform;
    use crate::problem::Problem;

    #[test]
    fn decisions_round_trip() {
        let xs = vec![
            DecisionVector(vec![0.1, -3.999_999_999_1]),
            DecisionVector(vec![1e-300, 4.0]),
        ];
        let mut buf = Vec::new();
        write_decisions(&mut buf, &xs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        assert_eq!(parse_decisions(&text).unwrap(), xs);
    }

    #[test]
    fn transform_round_trip_is_bit_exact() {
        let t = build_transform(&Problem::viennet(), 500, 4, 1e-4).unwrap();
        let mut buf = Vec::new();
        write_transform_csv(&mut buf, &t).unwrap();
        let back = parse_transform(std::str::from_utf8(&buf).unwrap(), &transform_sidecar_json(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.id(), t.id());
    }

    #[test]
    fn transform_parse_rejects_garbage() {
        let side = r#"{"problem_name":"p","sample_count":2,"seed":0,"tail_epsilon":0.1,"tail_span":[1.0,1.0]}"#;
        assert!(parse_transform("objective_index,knot_x,knot_p\n0,1,0.1\n0,2,0.9\n", side).is_err());
        assert!(parse_transform(
            "objective_index,knot_x,knot_p\n0,1,0.1\n0,2,0.9\n1,1,0.1\n1,2,0.9\n",
            side
        )
        .is_ok());
        assert!(parse_transform("objective_index,knot_x,knot_p\n0,1,0.1\n0,2,0.9\n5,1,0.1\n", side).is_err());
        assert!(parse_transform("a,b,c\n", side).is_err());
        assert!(parse_transform("objective_index,knot_x,knot_p\n0,NaN,0.1\n", side).is_err());
        assert!(parse_transform("", "{").is_err());
    }

    #[test]
    fn model_round_trip() {
        let m = CorrectionModel::random(3, 5, 11);
        let back = parse_model(&model_to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(parse_model(r#"{"input_dim":3}"#).is_err());
    }

    #[test]
    fn archive_parse_checks_flags() {
        let text = "w1,w2,x1,f1,f2,s1,s2,total_score,efficient\n\
                    0.5,0.5,0.1,1,2,0.9,0.8,1.7,true\n\
                    0.5,0.5,0.2,2,3,0.5,0.4,0.9,false\n";
        let a = parse_archive(text, "id").unwrap();
        assert_eq!(a.efficient_mask, vec![true, false]);
        assert!(parse_archive(&text.replace("0.9,false", "0.9,true"), "id").is_err());
        assert!(parse_archive(&text.replace("0.5,0.5,0.1", "0,0.5,0.1"), "id").is_err());
        assert!(parse_archive("w1,w2,x1\n", "id").is_err());
    }

    #[test]
    fn quantile_csv_layout() {
        let report = quantile_table(&[
            ("org", vec![0.0, 1.0]),
            ("corr", vec![0.5; 2]),
            ("online", vec![0.2; 2]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_quantile_table(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "quantile,org,corr,online");
        assert_eq!(lines[1], "0%,0,0.5,0.2");
        assert_eq!(lines[6], "50%,0.5,0.5,0.2");
        assert_eq!(lines[11], "100%,1,0.5,0.2");
    }
}
