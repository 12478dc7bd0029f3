//! Study reports: a deterministic JSON document, a flat CSV table and a
//! separate metadata file holding timings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use super::extrapolate::Extrapolation;
use crate::error::Result;
use crate::kernelmath::Horizon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

/// Status of a single computed row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    /// The solver hit its iteration cap.
    Flagged,
    /// A monotonicity or sandwich check failed at this row.
    Violation,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Flagged => "flagged",
            RowStatus::Violation => "violation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub delta_requested: Horizon,
    pub delta_effective: Horizon,
    pub n_interior: usize,
    pub k: usize,
    pub lambda_raw: f64,
    pub lambda_scaled: f64,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    /// Extrapolated limit for `delta -> 0` studies, the value at the largest
    /// finite horizon for `delta -> infinity` studies.
    pub estimate: f64,
    pub extrapolation: Option<Extrapolation>,
    pub reference: f64,
    pub relative_error: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub study: String,
    pub version: String,
    pub config: SweepConfig,
    pub rows: Vec<Row>,
    pub summaries: Vec<Summary>,
    pub flagged_fraction: f64,
    pub verdict: Verdict,
}

/// Wall-clock data kept out of the report so reports stay reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix_seconds: u64,
    pub total_seconds: f64,
    /// Seconds per solve, in the order horizons were processed.
    pub row_seconds: Vec<f64>,
    pub threads: usize,
}

pub const CSV_HEADER: [&str; 8] = [
    "delta_requested",
    "delta_effective",
    "k",
    "lambda_raw",
    "lambda_scaled",
    "reference",
    "rel_err",
    "verdict",
];

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl SweepReport {
    pub fn summary(&self, k: usize) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.k == k)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One line per computed row, followed by one `limit` line per `k`
    /// carrying the study estimate and its verdict. Row lines carry the row
    /// status in the verdict column.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let summary = self.summary(r.k);
            let reference = summary.map(|s| s.reference);
            let rel = reference.map(|re| relative_error(r.lambda_scaled, re));
            w.write_record([
                r.delta_requested.to_string(),
                r.delta_effective.to_string(),
                r.k.to_string(),
                num(r.lambda_raw),
                num(r.lambda_scaled),
                reference.map(num).unwrap_or_default(),
                rel.map(num).unwrap_or_default(),
                r.status.as_str().to_string(),
            ])?;
        }
        for s in &self.summaries {
            w.write_record([
                "limit".to_string(),
                "limit".to_string(),
                s.k.to_string(),
                String::new(),
                num(s.estimate),
                num(s.reference),
                num(s.relative_error),
                s.verdict.as_str().to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `<base>.json`, `<base>.csv` and `<base>.meta.json`, returning
    /// the paths written.
    pub fn write(&self, base: &Path, meta: &RunMetadata) -> Result<[PathBuf; 3]> {
        if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = base.to_string_lossy();
        let stem = text
            .strip_suffix(".json")
            .or_else(|| text.strip_suffix(".csv"))
            .unwrap_or(&text);
        let json = PathBuf::from(format!("{stem}.json"));
        let csv = PathBuf::from(format!("{stem}.csv"));
        let meta_path = PathBuf::from(format!("{stem}.meta.json"));
        std::fs::write(&json, self.to_json()?)?;
        std::fs::write(&csv, self.to_csv()?)?;
        std::fs::write(&meta_path, serde_json::to_string_pretty(meta)? + "\n")?;
        Ok([json, csv, meta_path])
    }
}

/// `|x - reference| / |reference|`, or `|x|` for a zero reference.
pub fn relative_error(x: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        x.abs()
    } else {
        (x - reference).abs() / reference.abs()
    }
}
