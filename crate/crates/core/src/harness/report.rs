//! Experiment reports and their CSV / JSON serializations.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 10] = [
    "dataset",
    "noise",
    "arch",
    "strategy",
    "seed",
    "ratio",
    "baseline_loss",
    "loss_after_prune",
    "loss_after_finetune",
    "score_wall_ms",
];

/// One `(strategy, seed, ratio)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub noise: f64,
    /// Original architecture, widths joined by `-`.
    pub arch: String,
    pub strategy: String,
    pub seed: u64,
    pub ratio: f64,
    /// Test loss at the checkpoint before pruning.
    pub baseline_loss: Option<f64>,
    /// Test loss right after pruning (and compensation). For the dense
    /// baseline: test loss of the narrowed network after the first training phase.
    pub loss_after_prune: Option<f64>,
    pub loss_after_finetune: Option<f64>,
    /// Wall time of the scoring phase; zero when timing is disabled or not applicable.
    pub score_wall_ms: f64,
    /// Architecture actually trained: differs from `arch` for the dense baseline.
    #[serde(default)]
    pub effective_arch: Option<String>,
    /// Set when the cell failed; losses are then absent.
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Report(format!("unknown report format {other:?}"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.error.is_none())
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// Floats use the shortest representation that parses back to the same
    /// value, so reloading is exact.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let err = |e: csv::Error| Error::Report(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_COLUMNS).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.dataset.clone(),
                r.noise.to_string(),
                r.arch.clone(),
                r.strategy.clone(),
                r.seed.to_string(),
                r.ratio.to_string(),
                opt(r.baseline_loss),
                opt(r.loss_after_prune),
                opt(r.loss_after_finetune),
                r.score_wall_ms.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Report(e.to_string()))
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_json<R: Read>(reader: R) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| Error::Report(e.to_string()))
    }

    /// Reads the CSV written by [`ExperimentReport::write_csv`]. Fields that
    /// CSV does not carry (`effective_arch`, `error`) come back empty.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Report(e.to_string()))?.clone();
        if headers.iter().ne(CSV_COLUMNS) {
            return Err(Error::Report(format!("unexpected CSV header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Report(format!("line {line}: {e}")))?;
            let num = |c: usize| -> Result<f64> {
                rec[c]
                    .parse()
                    .map_err(|_| Error::Report(format!("line {line}: column {} is not a number", CSV_COLUMNS[c])))
            };
            let opt_num = |c: usize| -> Result<Option<f64>> {
                if rec[c].is_empty() {
                    Ok(None)
                } else {
                    num(c).map(Some)
                }
            };
            rows.push(ReportRow {
                dataset: rec[0].to_string(),
                noise: num(1)?,
                arch: rec[2].to_string(),
                strategy: rec[3].to_string(),
                seed: rec[4]
                    .parse()
                    .map_err(|_| Error::Report(format!("line {line}: bad seed")))?,
                ratio: num(5)?,
                baseline_loss: opt_num(6)?,
                loss_after_prune: opt_num(7)?,
                loss_after_finetune: opt_num(8)?,
                score_wall_ms: num(9)?,
                effective_arch: None,
                error: None,
            });
        }
        Ok(Self { rows })
    }
}

/// Writes `report` to `path` in the given format.
pub fn write_report(report: &ExperimentReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let w = std::io::BufWriter::new(file);
    match format {
        ReportFormat::Csv => report.write_csv(w),
        ReportFormat::Json => report.write_json(w),
    }
}
