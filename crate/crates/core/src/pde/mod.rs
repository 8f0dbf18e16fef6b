//! Nonlinear PDE systems `F(x, D^α u(x)) = f(x)` and their extended
//! operator on piecewise polynomials.

mod assume;
mod problem;

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::jets::{factorial, Jet, JetError, MultiIndexSet, PiecewisePoly, Signature};
use crate::nlsc::{normalize, GridDomain, GridFunction, NlscError};

pub use assume::{
    check_assumption_interior, check_assumption_open, AssumptionVerdict, ProbeOptions,
};
pub use problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("{key}: {source}")]
    Expr { key: String, source: ExprError },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Nlsc(#[from] NlscError),
    #[error("right-hand side f{0} references jet variables")]
    RhsDependsOnJet(usize),
    #[error("expected {expected} {what} expressions, got {got}")]
    Count {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid box: {0}")]
    Box(String),
    #[error("point has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("operator evaluation at grid point {point}: {source}")]
    Eval { point: usize, source: ExprError },
    #[error("seed jet residual {residual:e} exceeds tolerance {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("spec line {line}: {msg}")]
    Spec { line: usize, msg: String },
    #[error("spec key {key}: {msg}")]
    SpecKey { key: String, msg: String },
}

/// `F_j(x, ξ) = f_j(x)`, `j = 1..K`, on a bounded box.
#[derive(Debug, Clone)]
pub struct PdeSystem {
    set: Arc<MultiIndexSet>,
    ops: Vec<Expr>,
    rhs: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn parse_all(set: &MultiIndexSet, prefix: &str, srcs: &[&str]) -> Result<Vec<Expr>, PdeError> {
    srcs.iter()
        .enumerate()
        .map(|(j, s)| {
            Expr::parse(s, set).map_err(|source| PdeError::Expr {
                key: format!("{prefix}{}", j + 1),
                source,
            })
        })
        .collect()
}

impl PdeSystem {
    pub fn new(
        sig: Signature,
        ops: &[&str],
        rhs: &[&str],
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) -> Result<Self, PdeError> {
        let set = Arc::new(MultiIndexSet::new(sig));
        for (what, got) in [("F", ops.len()), ("f", rhs.len())] {
            if got != sig.k {
                return Err(PdeError::Count {
                    what,
                    expected: sig.k,
                    got,
                });
            }
        }
        if lo.len() != sig.n || hi.len() != sig.n {
            return Err(PdeError::Box(format!("bounds need {} entries", sig.n)));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(PdeError::Box("need finite lo < hi on every axis".into()));
        }
        let ops = parse_all(&set, "F", ops)?;
        let rhs = parse_all(&set, "f", rhs)?;
        if let Some(j) = rhs.iter().position(|e| !e.jet_slots().is_empty()) {
            return Err(PdeError::RhsDependsOnJet(j + 1));
        }
        let jacobian = ops
            .iter()
            .map(|e| (0..set.dim()).map(|s| e.diff_jet(s)).collect())
            .collect();
        Ok(Self {
            set,
            ops,
            rhs,
            jacobian,
            lo,
            hi,
        })
    }

    pub fn signature(&self) -> Signature {
        self.set.signature()
    }

    pub fn set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    /// Number of jet variables `M`.
    pub fn jet_dim(&self) -> usize {
        self.set.dim()
    }

    pub fn k(&self) -> usize {
        self.set.k()
    }

    pub fn ops(&self) -> &[Expr] {
        &self.ops
    }

    pub fn rhs(&self) -> &[Expr] {
        &self.rhs
    }

    /// `∂F_j/∂ξ_s` as symbolic expressions.
    pub fn jacobian_exprs(&self) -> &[Vec<Expr>] {
        &self.jacobian
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// `F(x, ξ)` with `ξ` in slot order.
    pub fn apply_operator_point(&self, x: &[f64], jet: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.ops.iter().map(|e| e.eval_point(x, jet)).collect()
    }

    pub fn rhs_at(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.rhs.iter().map(|e| e.eval_point(x, &[])).collect()
    }

    /// Row-major `K x M` Jacobian of `F` in `ξ`.
    pub fn jacobian_at(&self, x: &[f64], jet: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.jacobian
            .iter()
            .flatten()
            .map(|e| e.eval_point(x, jet))
            .collect()
    }

    /// `(I∘S)(F_j(·, D^α V))` for each `j`, sampled on `grid`, which must
    /// share `v`'s geometry and mark at least its cell boundaries.
    pub fn apply_operator(
        &self,
        v: &PiecewisePoly,
        grid: &Arc<GridDomain>,
    ) -> Result<Vec<GridFunction>, PdeError> {
        if !v.domain().same_geometry(grid) || !v.domain().skeleton_subset_of(grid) {
            return Err(JetError::GridMismatch(
                "operator grid must refine the tiling skeleton".into(),
            )
            .into());
        }
        let k = self.k();
        let mut vals = vec![vec![0.0; grid.len()]; k];
        let mut jet = vec![0.0; self.jet_dim()];
        for p in 0..grid.len() {
            if grid.is_skeleton(p) {
                continue;
            }
            v.jet_at(p, &mut jet);
            let y = self
                .apply_operator_point(&grid.point(p), &jet)
                .map_err(|source| PdeError::Eval { point: p, source })?;
            for j in 0..k {
                vals[j][p] = y[j];
            }
        }
        vals.into_iter()
            .map(|v| Ok(normalize(&GridFunction::new(grid.clone(), v)?)))
            .collect()
    }

    /// `f_j` sampled on `grid` (off the skeleton) and normalized.
    pub fn sample_rhs(&self, grid: &Arc<GridDomain>) -> Result<Vec<GridFunction>, PdeError> {
        let mut vals = vec![vec![0.0; grid.len()]; self.k()];
        for p in 0..grid.len() {
            if grid.is_skeleton(p) {
                continue;
            }
            let y = self
                .rhs_at(&grid.point(p))
                .map_err(|source| PdeError::Eval { point: p, source })?;
            for (j, v) in y.into_iter().enumerate() {
                vals[j][p] = v;
            }
        }
        vals.into_iter()
            .map(|v| Ok(normalize(&GridFunction::new(grid.clone(), v)?)))
            .collect()
    }
}

/// A known solution `u*`, used for diagnostics and seeding. Space
/// derivatives come from nested central differences.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    set: Arc<MultiIndexSet>,
    comps: Vec<Expr>,
}

impl ExactSolution {
    pub fn new(set: Arc<MultiIndexSet>, srcs: &[&str]) -> Result<Self, PdeError> {
        if srcs.len() != set.k() {
            return Err(PdeError::Count {
                what: "exact",
                expected: set.k(),
                got: srcs.len(),
            });
        }
        let comps = parse_all(&set, "exact", srcs)?;
        if let Some(j) = comps.iter().position(|e| !e.jet_slots().is_empty()) {
            return Err(PdeError::Expr {
                key: format!("exact{}", j + 1),
                source: ExprError::Domain("exact solution must not reference jet variables".into()),
            });
        }
        Ok(Self { set, comps })
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn value(&self, component: usize, x: &[f64]) -> Result<f64, ExprError> {
        self.comps[component].eval_point(x, &[])
    }

    /// All `D^α u*_i(x)` in slot order.
    pub fn jet_values(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        let mut out = Vec::with_capacity(self.set.dim());
        for e in &self.comps {
            for alpha in self.set.indices() {
                out.push(central_difference(e, &alpha.0, x)?);
            }
        }
        Ok(out)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet, PdeError> {
        let vals = self.jet_values(x).map_err(|source| PdeError::Expr {
            key: "exact".into(),
            source,
        })?;
        Ok(Jet::new(self.set.clone(), x.to_vec(), vals)?)
    }
}

/// Tensor-product central difference `D^α e(x)`; the step balances
/// truncation against rounding for the total order.
fn central_difference(e: &Expr, alpha: &[u32], x: &[f64]) -> Result<f64, ExprError> {
    let order: u32 = alpha.iter().sum();
    if order == 0 {
        return e.eval_point(x, &[]);
    }
    let h_rel = f64::EPSILON.powf(1.0 / (order as f64 + 2.0));
    let h: Vec<f64> = x.iter().map(|xi| h_rel * xi.abs().max(1.0)).collect();
    // per-axis stencil: offsets (k/2 - j) h with weights (-1)^j C(k, j)
    let stencils: Vec<Vec<(f64, f64)>> = alpha
        .iter()
        .zip(&h)
        .map(|(&k, &h)| {
            (0..=k)
                .map(|j| {
                    let w = factorial(k) / (factorial(j) * factorial(k - j));
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    ((k as f64 / 2.0 - j as f64) * h, sign * w / h.powi(k as i32))
                })
                .collect()
        })
        .collect();
    let mut acc = 0.0;
    let mut idx = vec![0usize; x.len()];
    let mut y = x.to_vec();
    loop {
        let mut w = 1.0;
        for a in 0..x.len() {
            let (off, wa) = stencils[a][idx[a]];
            y[a] = x[a] + off;
            w *= wa;
        }
        acc += w * e.eval_point(&y, &[])?;
        let mut a = x.len();
        loop {
            if a == 0 {
                return Ok(acc);
            }
            a -= 1;
            if idx[a] + 1 < stencils[a].len() {
                idx[a] += 1;
                break;
            }
            idx[a] = 0;
        }
    }
}
