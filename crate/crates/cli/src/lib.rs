//! Batch front end. [`run_pipeline`] solves a problem file and writes
//! certificates; [`verify`] re-checks them from the artifacts alone.

mod pipeline;
pub mod report;
mod verify;

use std::path::{Path, PathBuf};

use ordercomplete::pde::{PdeError, ProblemSpec};
use ordercomplete::solver::SolverError;
use ordercomplete::{ExactSolution, PdeSystem};
use thiserror::Error;

pub use pipeline::{run_pipeline, RunOutcome};
pub use verify::{verify, VerifyOutcome};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const CERTIFICATE: i32 = 2;
    pub const CONSTRUCTION: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Spec { path: PathBuf, source: PdeError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("certificate check failed: {0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Spec { .. } | CliError::Io { .. } => exit::USAGE,
            CliError::Construction(_) => exit::CONSTRUCTION,
            CliError::Certificate(_) => exit::CERTIFICATE,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Construction(e.to_string())
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: PathBuf,
    pub gamma: f64,
    pub stages: usize,
    /// Overrides the problem file's `grid`; one value for every axis.
    pub grid: Option<usize>,
    pub eps_max: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub skip_assumption_check: bool,
    pub emit_samples: bool,
    pub verify_only: bool,
}

impl RunConfig {
    pub fn new(spec: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            spec: spec.into(),
            gamma: 0.2,
            stages: 5,
            grid: None,
            eps_max: 1.0,
            seed: 0,
            out: out.into(),
            skip_assumption_check: false,
            emit_samples: true,
            verify_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(CliError::Usage(format!(
                "--gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.stages == 0 {
            return Err(CliError::Usage("--stages must be at least 1".into()));
        }
        if !(self.eps_max > 0.0 && self.eps_max.is_finite()) {
            return Err(CliError::Usage(format!(
                "--eps-max must be positive, got {}",
                self.eps_max
            )));
        }
        if let Some(g) = self.grid {
            if g < 8 {
                return Err(CliError::Usage(format!(
                    "--grid must be at least 8 per axis, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// A validated problem file.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub text: String,
    pub spec: ProblemSpec,
    pub system: PdeSystem,
    pub exact: Option<ExactSolution>,
}

pub fn load_spec(path: &Path) -> Result<LoadedSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_spec(path, text)
}

pub(crate) fn parse_spec(path: &Path, text: String) -> Result<LoadedSpec, CliError> {
    let wrap = |source| CliError::Spec {
        path: path.to_path_buf(),
        source,
    };
    let spec = ProblemSpec::parse(&text).map_err(wrap)?;
    let system = spec.system().map_err(wrap)?;
    let exact = spec.exact_solution().map_err(wrap)?;
    Ok(LoadedSpec {
        text,
        spec,
        system,
        exact,
    })
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension()
            .and_then(|e| e.to_str())
            .unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}
