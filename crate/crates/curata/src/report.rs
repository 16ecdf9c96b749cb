//! Flat tab-separated reports for the analysis instruments, plus readers for
//! their inputs.

use std::path::Path;

use curata_core::analysis::{CorrelationMatrix, EpochPlan, Histogram, MetricTriple, OverScaling};
use serde::Deserialize;

use crate::{Error, Result};

fn tsv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Malformed {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn finish(path: &Path, mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush().map_err(Error::io(path))
}

/// One row per ordered pair: `a  b  tau`.
pub fn write_tau_matrix(path: &Path, labels: &[String], m: &CorrelationMatrix) -> Result<()> {
    let mut w = tsv_writer(path)?;
    let row = |w: &mut csv::Writer<_>, rec: &[&str]| w.write_record(rec).map_err(|e| csv_error(path, e));
    row(&mut w, &["a", "b", "tau"])?;
    for (i, a) in labels.iter().enumerate() {
        for (j, b) in labels.iter().enumerate() {
            row(&mut w, &[a, b, &m.values[i][j].to_string()])?;
        }
    }
    finish(path, w)
}

/// One row per bin: `lower  upper  count`.
pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    let mut w = tsv_writer(path)?;
    let e = |err| csv_error(path, err);
    w.write_record(["lower", "upper", "count"]).map_err(e)?;
    for (i, c) in h.counts.iter().enumerate() {
        w.write_record([h.edges[i].to_string(), h.edges[i + 1].to_string(), c.to_string()])
            .map_err(e)?;
    }
    finish(path, w)
}

/// Gap closed by a single metric, oriented so that improvement is positive.
pub fn triple_percent(t: &MetricTriple) -> Option<f64> {
    let sign = if t.higher_is_better { 1.0 } else { -1.0 };
    let (s, f, r) = (sign * t.sampled, sign * t.full, sign * t.reference);
    (r != f).then(|| 100.0 * (s - f) / (r - f))
}

/// Per-metric rows followed by a `mean` row.
pub fn write_overscaling(path: &Path, triples: &[MetricTriple], result: &OverScaling) -> Result<()> {
    let mut w = tsv_writer(path)?;
    let e = |err| csv_error(path, err);
    w.write_record(["metric", "sampled", "full", "reference", "higher_is_better", "percent"])
        .map_err(e)?;
    for t in triples {
        w.write_record([
            t.name.clone(),
            t.sampled.to_string(),
            t.full.to_string(),
            t.reference.to_string(),
            t.higher_is_better.to_string(),
            triple_percent(t).map_or_else(|| "skipped".to_owned(), |p| p.to_string()),
        ])
        .map_err(e)?;
    }
    w.write_record(["mean", "", "", "", "", &result.percent.to_string()])
        .map_err(e)?;
    finish(path, w)
}

pub fn format_plan(plan: &EpochPlan) -> [String; 5] {
    [
        format!("{:.0}", plan.dataset_tokens),
        format!("{:.2}", plan.sampling_ratio),
        format!("{:.0}", plan.budget_tokens),
        format!("{:.0}", plan.sampled_tokens),
        format!("{:.2}", plan.epochs),
    ]
}

pub const PLAN_HEADER: [&str; 5] = ["dataset_tokens", "sampling_ratio", "budget_tokens", "sampled_tokens", "epochs"];

pub fn write_plan(path: &Path, plan: &EpochPlan) -> Result<()> {
    let mut w = tsv_writer(path)?;
    let e = |err| csv_error(path, err);
    w.write_record(PLAN_HEADER).map_err(e)?;
    w.write_record(format_plan(plan)).map_err(e)?;
    finish(path, w)
}

#[derive(Deserialize)]
struct MetricRow {
    metric: String,
    sampled: f64,
    full: f64,
    reference: f64,
    higher_is_better: bool,
}

/// Reads a metric file: tab-separated with header
/// `metric sampled full reference higher_is_better`.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricTriple>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    r.deserialize::<MetricRow>()
        .map(|row| {
            let row = row.map_err(|e| csv_error(path, e))?;
            Ok(MetricTriple::new(row.metric, row.sampled, row.full, row.reference, row.higher_is_better))
        })
        .collect()
}

/// Parses token counts such as `184B`, `36.8e9`, `524000000000` or `1.5T`.
pub fn parse_tokens(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, scale) = match s.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() && !matches!(c, 'e' | 'E') => {
            let scale = match c.to_ascii_uppercase() {
                'K' => 1e3,
                'M' => 1e6,
                'B' | 'G' => 1e9,
                'T' => 1e12,
                _ => return Err(format!("unknown suffix {c:?} in {s:?}")),
            };
            (&s[..i], scale)
        }
        _ => (s, 1.0),
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("not a token count: {s:?}"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("token count must be positive: {s:?}"));
    }
    Ok(v * scale)
}
