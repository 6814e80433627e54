use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported stencil: {0}")]
    UnsupportedStencil(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("machine file {path}: {source}")]
    MachineParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("machine validation failed at `{field}`: {reason}")]
    MachineValidation { field: String, reason: String },

    #[error("template render failed: {0}")]
    Template(String),

    #[error("address stream of {requested} elements exceeds the simulation budget of {budget} elements")]
    SimulationBudget { requested: u64, budget: u64 },

    #[error("compiler command `{command}` failed: {diagnostics}")]
    Compile { command: String, diagnostics: String },

    #[error("benchmark `{command}` exited with {status}: {stderr}")]
    Run {
        command: String,
        status: String,
        stderr: String,
    },

    #[error("unparseable benchmark output line {line_no}: `{line}`")]
    BenchmarkOutput { line_no: usize, line: String },

    #[error("counter ingestion: {0}")]
    Counters(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("planning: {0}")]
    Plan(String),

    #[error("sweep failed for every size: {0}")]
    Sweep(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::MachineValidation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
