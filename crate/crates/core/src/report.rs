//! CSV result tables and run manifests.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{Evaluation, RuntimePoint, SeedStudyPoint, SweepResult};
use crate::metrics::MetricReport;
use crate::model_spec::ModelSpec;
use crate::qualitative::NamedRecommendation;

/// Number of leading columns that hold metrics; the rest are wall-clock timings.
pub const METRIC_COLUMNS: usize = 7;

/// One row of an evaluation or sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub model: String,
    pub variant: String,
    pub hyperparameters: String,
    /// Fold index, or `mean`.
    pub fold: String,
    pub precision: f64,
    pub ndcg: f64,
    pub fit_seconds: f64,
    pub score_seconds: f64,
}

fn metric(v: f64) -> String {
    format!("{v:.6}")
}

fn seconds(v: f64) -> String {
    format!("{v:.3}")
}

fn header_for(report: Option<&MetricReport>, n_items: usize) -> (String, String) {
    let kp = report.map_or(20, |r| r.k_precision);
    let kn = report.map_or(n_items, |r| r.k_ndcg);
    let p = format!("precision_at_{kp}");
    let n = if kn == n_items {
        "ndcg_at_m".to_string()
    } else {
        format!("ndcg_at_{kn}")
    };
    (p, n)
}

impl ResultRow {
    fn new(dataset: &str, spec: &ModelSpec, fold: String, report: &MetricReport, fit: f64, score: f64) -> Self {
        Self {
            dataset: dataset.to_string(),
            model: spec.family().to_string(),
            variant: spec.variant(),
            hyperparameters: spec.hyperparameters(),
            fold,
            precision: report.precision_at_k,
            ndcg: report.ndcg_at_k,
            fit_seconds: fit,
            score_seconds: score,
        }
    }

    /// One row per fold followed by the mean row.
    pub fn from_evaluation(dataset: &str, evaluation: &Evaluation) -> Vec<Self> {
        let spec = &evaluation.spec;
        let mut rows: Vec<Self> = evaluation
            .folds
            .iter()
            .map(|f| {
                Self::new(
                    dataset,
                    spec,
                    f.fold.to_string(),
                    &f.report,
                    f.fit_seconds,
                    f.score_seconds,
                )
            })
            .collect();
        rows.push(Self::new(
            dataset,
            spec,
            "mean".into(),
            &evaluation.mean,
            evaluation.fit_seconds(),
            evaluation.score_seconds(),
        ));
        rows
    }

    /// One row per fold with the hyperparameters chosen there, then the mean row listing the
    /// distinct choices.
    pub fn from_sweep(dataset: &str, result: &SweepResult) -> Vec<Self> {
        let mut rows: Vec<Self> = result
            .folds
            .iter()
            .map(|f| {
                let o = &f.outcome;
                Self::new(
                    dataset,
                    &f.chosen,
                    o.fold.to_string(),
                    &o.report,
                    o.fit_seconds,
                    o.score_seconds,
                )
            })
            .collect();
        let Some(first) = result.folds.first() else {
            return rows;
        };
        let mut chosen: Vec<String> = Vec::new();
        for f in &result.folds {
            let h = f.chosen.hyperparameters();
            if !chosen.contains(&h) {
                chosen.push(h);
            }
        }
        let mut mean = Self::new(
            dataset,
            &first.chosen,
            "mean".into(),
            &result.mean,
            result.folds.iter().map(|f| f.outcome.fit_seconds).sum(),
            result.folds.iter().map(|f| f.outcome.score_seconds).sum(),
        );
        mean.hyperparameters = chosen.join(" | ");
        rows.push(mean);
        rows
    }

    fn record(&self) -> [String; 9] {
        [
            self.dataset.clone(),
            self.model.clone(),
            self.variant.clone(),
            self.hyperparameters.clone(),
            self.fold.clone(),
            metric(self.precision),
            metric(self.ndcg),
            seconds(self.fit_seconds),
            seconds(self.score_seconds),
        ]
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("writing CSV: {e}"))
}

/// Writes rows under the header `dataset,model,variant,hyperparameters,fold,precision_at_20,
/// ndcg_at_m,fit_seconds,score_seconds` (cutoffs taken from `report`).
pub fn write_results<W: Write>(
    out: W,
    rows: &[ResultRow],
    report: Option<&MetricReport>,
    n_items: usize,
) -> Result<()> {
    let (p, n) = header_for(report, n_items);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "model",
        "variant",
        "hyperparameters",
        "fold",
        &p,
        &n,
        "fit_seconds",
        "score_seconds",
    ])
    .map_err(csv_error)?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// One mean row per (model, seed size).
pub fn write_seed_study<W: Write>(out: W, dataset: &str, points: &[SeedStudyPoint], n_items: usize) -> Result<()> {
    let (p, n) = header_for(points.first().map(|p| &p.evaluation.mean), n_items);
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "model",
        "variant",
        "hyperparameters",
        "seed_size",
        &p,
        &n,
        "fit_seconds",
        "score_seconds",
    ])
    .map_err(csv_error)?;
    for point in points {
        let e = &point.evaluation;
        w.write_record([
            dataset.to_string(),
            point.spec.family().to_string(),
            point.spec.variant(),
            point.spec.hyperparameters(),
            point.seed_size.to_string(),
            metric(e.mean.precision_at_k),
            metric(e.mean.ndcg_at_k),
            seconds(e.fit_seconds()),
            seconds(e.score_seconds()),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_benchmark<W: Write>(out: W, dataset: &str, points: &[RuntimePoint], k_precision: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = format!("precision_at_{k_precision}");
    w.write_record([
        "dataset",
        "model",
        "variant",
        "hyperparameters",
        "n_users",
        &p,
        "fit_seconds",
        "score_seconds",
    ])
    .map_err(csv_error)?;
    for point in points {
        w.write_record([
            dataset.to_string(),
            point.spec.family().to_string(),
            point.spec.variant(),
            point.spec.hyperparameters(),
            point.n_users.to_string(),
            metric(point.precision_at_k),
            format!("{:.6}", point.fit_seconds),
            format!("{:.6}", point.score_seconds),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Labeled lists as CSV: `model,variant,rank,item,label,score`.
pub fn write_named<W: Write>(out: W, recs: &[NamedRecommendation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "variant", "rank", "item", "label", "score"])
        .map_err(csv_error)?;
    for rec in recs {
        for (rank, item) in rec.items.iter().enumerate() {
            w.write_record([
                rec.model.family().to_string(),
                rec.model.variant(),
                (rank + 1).to_string(),
                item.item.to_string(),
                item.label.clone(),
                format!("{:.6}", item.score),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Labeled list as aligned text.
pub fn format_named(rec: &NamedRecommendation) -> String {
    let width = rec.items.iter().map(|i| i.label.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{} seeded with: {}", rec.model.label(), rec.seed_labels.join(", "));
    for (rank, item) in rec.items.iter().enumerate() {
        let _ = writeln!(out, "{:>3}. {:<width$}  {:.4}", rank + 1, item.label, item.score);
    }
    out
}

/// A results CSV without its timing columns. Two runs with the same configuration and seed
/// produce identical bodies.
pub fn metric_body(csv_text: &str) -> String {
    let mut out = String::new();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let mut w = csv::Writer::from_writer(Vec::new());
    for record in reader.records().flatten() {
        let fields: Vec<&str> = record.iter().take(METRIC_COLUMNS).collect();
        let _ = w.write_record(&fields);
    }
    if let Ok(bytes) = w.into_inner() {
        out.push_str(&String::from_utf8_lossy(&bytes));
    }
    out
}

/// Hex SHA-256 of a file.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let read = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            break;
        }
        hasher.update(&buf[..read]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Plain-text record of what a run used: `key: value` lines in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Records a data file's path and checksum.
    pub fn push_file(&mut self, key: &str, path: &Path) -> Result<()> {
        self.push(key, path.display());
        self.push(&format!("{key}_sha256"), file_sha256(path)?);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl std::fmt::Display for RunManifest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}: {v}")?;
        }
        Ok(())
    }
}
