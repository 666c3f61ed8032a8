//! Orchestration behind the `ldf-das` command line: run configuration,
//! synthetic cohorts, the train/evaluate grid and report rendering.

mod cohort;
mod commands;
mod config;
mod data;
mod grid;
mod report;

use std::fmt::Display;
use std::path::Path;

use thiserror::Error;

pub use cohort::{generate_cohort, write_cohort, Cohort, CohortSpec};
pub use commands::*;
pub use config::{Paths, RunConfig, SplitSpec, TaskName, WaveletConfig, OUTPUT_DIR_ENV};
pub use data::{
    extract_signal_files, load_schema, merge_signal_features, prepare, signal_files,
    signal_warnings, task_labels, PreparedData, SignalFeatures,
};
pub use grid::{
    cells, read_reports, run_cell, run_grid, run_id, task_of, write_curves, write_outcome,
    CellOutput, GridOutcome, OutOfFold, MULTICLASS_K,
};
pub use report::{
    aggregate, metric_value, render_markdown, write_summary_csv, CellSpec, CellStatus,
    MetricSummary, RunReport, METRICS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    /// A lower-level failure with the stage or file it came from.
    #[error("{context}: {message}")]
    Data { context: String, message: String },
    #[error("{failed} of {total} grid cells failed")]
    PartialGridFailure { failed: usize, total: usize },
    #[error("io: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn data(context: &str, e: impl Display) -> Self {
        PipelineError::Data {
            context: context.to_string(),
            message: e.to_string(),
        }
    }

    /// Prefixes the context of a data error.
    pub fn context(self, outer: String) -> Self {
        match self {
            PipelineError::Data { context, message } => PipelineError::Data {
                context: format!("{outer}: {context}"),
                message,
            },
            other => other,
        }
    }
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}
