//! Experiment harness: batch convergence studies, placement accuracy and
//! machine-readable outputs for the `assembly` command-line tool.

use std::path::Path;

pub mod accuracy;
pub mod batch;
pub mod output;
pub mod plot;
pub mod variants;

pub use accuracy::{report_accuracy, AccuracySummary, ErrorStats};
pub use batch::{run_batch, BatchReport, RunSummary, Spread};
pub use plot::{read_plot_data, write_plot_data, Curve};
pub use variants::disturbance_variants;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] assembly_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl HarnessError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        }
    }
}
