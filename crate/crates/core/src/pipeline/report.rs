use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::TaskName;
use crate::dataset::FeatureSetName;
use crate::explain::FeatureRank;
use crate::metrics::MetricReport;
use crate::models::{FeatureImportance, ModelKind};
use crate::splits::SplitScheme;

/// Metric names in table order.
pub const METRICS: [&str; 7] = [
    "roc_auc",
    "pr_auc",
    "macro_ovr_auc",
    "macro_ovo_auc",
    "macro_precision",
    "macro_recall",
    "macro_f1",
];

pub fn metric_value(r: &MetricReport, name: &str) -> Option<f64> {
    match name {
        "roc_auc" => r.roc_auc,
        "pr_auc" => r.pr_auc,
        "macro_ovr_auc" => r.macro_ovr_auc,
        "macro_ovo_auc" => r.macro_ovo_auc,
        "macro_precision" => Some(r.macro_precision),
        "macro_recall" => Some(r.macro_recall),
        "macro_f1" => Some(r.macro_f1),
        _ => None,
    }
}

/// One grid cell: everything except the seeds, which are aggregated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellSpec {
    pub feature_set: FeatureSetName,
    pub split: SplitScheme,
    pub task: TaskName,
    pub model: ModelKind,
}

impl CellSpec {
    pub fn id(&self) -> String {
        format!(
            "{}__{}__{}__{}",
            self.feature_set,
            self.split,
            self.task.as_str(),
            self.model
        )
    }
}

/// Mean and sample standard deviation of the defined values of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                n,
                mean: None,
                std: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean: Some(mean),
            std: Some(std),
        }
    }
}

pub fn aggregate(reports: &[MetricReport]) -> BTreeMap<String, MetricSummary> {
    METRICS
        .iter()
        .map(|&m| {
            let v: Vec<f64> = reports.iter().filter_map(|r| metric_value(r, m)).collect();
            (m.to_string(), MetricSummary::of(&v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

/// Outcome of one grid cell. Contains no wall-clock values, so identical
/// configs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub crate_version: String,
    pub model_format_version: u32,
    pub config: serde_json::Value,
    pub cell: CellSpec,
    pub status: CellStatus,
    pub n_rows: usize,
    pub n_patients: usize,
    pub class_counts: Vec<usize>,
    pub feature_names: Vec<String>,
    /// One entry per (seed, fold), seeds outermost.
    pub folds: Vec<MetricReport>,
    /// Out-of-fold predictions of all folds of one seed, scored together.
    pub pooled: Vec<MetricReport>,
    pub aggregate: BTreeMap<String, MetricSummary>,
    pub pooled_aggregate: BTreeMap<String, MetricSummary>,
    /// Of the model refitted on every labelled row (tree models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_importance: Option<FeatureImportance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shap_ranking: Option<Vec<FeatureRank>>,
    pub warnings: Vec<String>,
}

impl RunReport {
    /// Fold mean when any fold defines the metric, otherwise the pooled mean.
    /// LOPO always uses the pooled mean: a fold holds one patient, so its
    /// metrics are undefined or trivial.
    pub fn headline(&self, metric: &str) -> Option<MetricSummary> {
        let folds = self.aggregate.get(metric).filter(|s| s.n > 0);
        let pooled = self.pooled_aggregate.get(metric).filter(|s| s.n > 0);
        if self.cell.split == SplitScheme::Lopo {
            pooled.or(folds).copied()
        } else {
            folds.or(pooled).copied()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn fmt4(s: Option<MetricSummary>) -> String {
    match s.and_then(|s| Some((s.mean?, s.std?))) {
        Some((m, sd)) => format!("{m:.4} ± {sd:.4}"),
        None => "n/a".into(),
    }
}

/// Markdown table, one row per cell, metrics with four decimals.
pub fn render_markdown(reports: &[RunReport]) -> String {
    let mut out = String::from("| feature set | split | task | model | ");
    out.push_str(&METRICS.join(" | "));
    out.push_str(" | evaluations | status |\n|");
    for _ in 0..METRICS.len() + 6 {
        out.push_str("---|");
    }
    out.push('\n');
    for r in reports {
        let c = &r.cell;
        let _ = write!(
            out,
            "| {} | {} | {} | {} |",
            c.feature_set,
            c.split,
            c.task.as_str(),
            c.model
        );
        for m in METRICS {
            let _ = write!(out, " {} |", fmt4(r.headline(m)));
        }
        let status = match &r.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed { error } => format!("FAILED: {}", error.replace('|', "/")),
        };
        let _ = writeln!(out, " {} | {} |", r.folds.len(), status);
    }
    out
}

/// Delimited version of [`render_markdown`] with separate mean/std columns.
pub fn write_summary_csv<W: Write>(reports: &[RunReport], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["feature_set", "split", "task", "model"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    header.extend(["evaluations".to_string(), "status".to_string()]);
    w.write_record(&header)?;
    for r in reports {
        let c = &r.cell;
        let mut row = vec![
            c.feature_set.to_string(),
            c.split.to_string(),
            c.task.as_str().to_string(),
            c.model.to_string(),
        ];
        for m in METRICS {
            let s = r.headline(m);
            let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
            row.push(f(s.and_then(|s| s.mean)));
            row.push(f(s.and_then(|s| s.std)));
        }
        row.push(r.folds.len().to_string());
        row.push(match &r.status {
            CellStatus::Ok => "ok".into(),
            CellStatus::Failed { error } => format!("failed: {error}"),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
