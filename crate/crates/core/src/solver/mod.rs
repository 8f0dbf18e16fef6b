//! Lower/upper approximate solutions and the certified refinement scheme.
//!
//! The pipeline is: [`jet_solve`] finds a jet `ξ` with `F(x0, ξ)` on a
//! target; [`local_lower`] / [`local_upper`] turn it into a Taylor
//! polynomial bracketing `f` on a ball; [`global_pair`] patches such
//! polynomials over an adaptive tiling; [`refine`] and [`run_scheme`] build
//! the nested sequence `V_n` with its order-interval bands.

mod global;
mod jet_solve;
mod local;
mod refine;
mod scheme;
mod tiling;

use thiserror::Error;

use crate::expr::ExprError;
use crate::jets::JetError;
use crate::nlsc::NlscError;
use crate::pde::PdeError;

pub use global::{global_pair, ApEqCertificate, GlobalPair};
pub use jet_solve::{jet_solve, JetSolveOptions};
pub use local::{local_lower, local_upper, LocalSolution};
pub use refine::{i_cell_owner, refine, Certificate, RefinementStage, StageContext};
pub use scheme::{run_scheme, BandCheck, SchemeOptions, SchemeResult};
pub use tiling::{default_delta, split_with_floor, tile_domain, Tiling, MIN_CELL_WIDTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no jet found at x = {x:?} for target {target:?}; best residual {best_residual:e}")]
    NoSolution {
        x: Vec<f64>,
        target: Vec<f64>,
        best_residual: f64,
    },
    #[error("bracket unattainable at grid resolution in {} cell(s), first {:?}", .cells.len(), .cells.first())]
    BracketUnattainable { cells: Vec<CellFailure> },
    #[error("stage {stage}, I-cell {cell}: {source}")]
    Stage {
        stage: usize,
        cell: usize,
        source: Box<SolverError>,
    },
    #[error("openness not witnessed at anchor {anchor:?} down to eps = {eps_min:e}")]
    OpennessUnwitnessed { anchor: Vec<f64>, eps_min: f64 },
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Nlsc(#[from] NlscError),
    #[error("evaluation: {0}")]
    Expr(#[from] ExprError),
}

/// A cell that could not be subdivided further, with the reason.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CellFailure {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub reason: String,
}
