//! Constructive order-completion machinery for systems of continuous
//! nonlinear PDEs.
//!
//! The crate is organised bottom-up:
//!
//! * [`expr`] parses and evaluates the defining expressions `F_j` and `f_j`
//!   with point and interval arithmetic plus symbolic jet derivatives.
//! * [`jets`] holds Taylor polynomials with prescribed derivatives and
//!   their piecewise assembly.
//! * [`nlsc`] is the discrete calculus of normal lower semi-continuous
//!   functions sampled on rectangular grids.
//! * [`pde`] represents a PDE system and evaluates its operator.
//! * [`solver`] builds lower/upper approximate solutions and the certified
//!   nested refinement scheme.
//! * [`analysis`] pushes order intervals through `F` and compares runs
//!   against reference solutions.
//!
//! ```
//! use ordercomplete::solver::{run_scheme, SchemeOptions};
//! use ordercomplete::{GridDomain, PdeSystem, Signature};
//!
//! let sys = PdeSystem::new(
//!     Signature::new(1, 1, 1),
//!     &["u[1,(1)] + u[1,(0)]^3"],
//!     &["cos(x1) + sin(x1)^3"],
//!     vec![0.0],
//!     vec![3.0],
//! )?;
//! let grid = GridDomain::uniform(vec![0.0], vec![3.0], 512)?;
//! let result = run_scheme(&sys, &grid, &SchemeOptions::default(), None)?;
//! assert!(result.verdict);
//! assert!(result.final_residual < 0.2 / 5.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analysis;
pub mod expr;
pub mod jets;
pub mod nlsc;
pub mod pde;
pub mod solver;

pub use expr::{Expr, ExprError, Interval};
pub use jets::{Jet, MultiIndex, MultiIndexSet, PiecewisePoly, Polynomial, Signature};
pub use nlsc::{GridDomain, GridFunction, NlscError, OrderInterval};

pub use pde::{ExactSolution, PdeSystem};
pub use solver::{RefinementStage, SchemeOptions, SchemeResult, SolverError, Tiling};
