//! Benchmark harness: suite runs, result files, reports and transcript
//! analytics.

pub mod analytics;
pub mod config;
pub mod report;
pub mod rescore;
pub mod runner;

use std::path::Path;

pub use config::{derive_seed, AgentConfig, SuiteConfig, TaskFilter};
pub use report::{render_report, summarize, Summary};
pub use runner::{read_records, run_suite, RunRecord, RunStatus, SuiteOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("agent endpoint: {0}")]
    Endpoint(String),
    #[error("{0}")]
    Session(String),
}

impl HarnessError {
    pub fn io(path: &Path, e: std::io::Error) -> HarnessError {
        HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
