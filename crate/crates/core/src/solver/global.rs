use std::sync::Arc;

use serde::Serialize;

use super::local::bracketed;
use super::tiling::{default_delta, split_with_floor, tile_domain};
use super::{jet_solve, CellFailure, JetSolveOptions, SolverError};
use crate::jets::{assemble, taylor_poly, Cell, PiecewisePoly, Polynomial};
use crate::nlsc::GridDomain;
use crate::pde::PdeSystem;

/// Margins of `f - ε < T U < f < T V < f + ε` over unmarked grid points;
/// each must be positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApEqCertificate {
    pub eps: f64,
    pub lower_floor: f64,
    pub lower_ceiling: f64,
    pub upper_floor: f64,
    pub upper_ceiling: f64,
    pub points: usize,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GlobalPair {
    pub lower: PiecewisePoly,
    pub upper: PiecewisePoly,
    pub certificate: ApEqCertificate,
}

impl GlobalPair {
    /// `Γ_ε`: the shared cell boundaries.
    pub fn skeleton(&self) -> &Arc<GridDomain> {
        self.lower.domain()
    }
}

fn cell_holds(
    sys: &PdeSystem,
    grid: &GridDomain,
    cell: &Cell,
    polys: &[Polynomial],
    eps: f64,
    sign: f64,
) -> bool {
    let count = sys.set().count();
    let mut jet = vec![0.0; sys.jet_dim()];
    cell.interior_points(grid).into_iter().all(|p| {
        let x = grid.point(p);
        for (i, poly) in polys.iter().enumerate() {
            poly.derivs_at(&x, &mut jet[i * count..(i + 1) * count]);
        }
        match (sys.apply_operator_point(&x, &jet), sys.rhs_at(&x)) {
            (Ok(t), Ok(f)) => t.iter().zip(&f).all(|(&t, &f)| bracketed(t, f, eps, sign)),
            _ => false,
        }
    })
}

/// Lower and upper solutions `U_ε`, `V_ε` on one shared adaptive tiling.
///
/// Cells start at diameter `δ` (default: [`default_delta`]) and are halved
/// wherever either bracket fails, down to [`super::MIN_CELL_WIDTH`] grid
/// spacings.
pub fn global_pair(
    sys: &PdeSystem,
    grid: &GridDomain,
    eps: f64,
    delta: Option<f64>,
    opts: &JetSolveOptions,
) -> Result<GlobalPair, SolverError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolverError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let tiling = tile_domain(grid, delta.unwrap_or_else(|| default_delta(grid)), 2)?;
    let grid = tiling.grid().clone();
    let mut todo: Vec<Cell> = tiling.cells.iter().rev().cloned().collect();
    let mut cells = Vec::new();
    let mut lows = Vec::new();
    let mut ups = Vec::new();
    let mut failures = Vec::new();
    while let Some(cell) = todo.pop() {
        let a = cell.center(&grid);
        let f = sys.rhs_at(&a)?;
        let t_lo: Vec<f64> = f.iter().map(|v| v - eps / 2.0).collect();
        let t_up: Vec<f64> = f.iter().map(|v| v + eps / 2.0).collect();
        let lo = jet_solve(sys, &a, &t_lo, None, None, opts)?;
        let up = jet_solve(sys, &a, &t_up, Some(lo.values()), None, opts)?;
        let (pl, pu) = (taylor_poly(&lo), taylor_poly(&up));
        if cell_holds(sys, &grid, &cell, &pl, eps, -1.0)
            && cell_holds(sys, &grid, &cell, &pu, eps, 1.0)
        {
            cells.push(cell);
            lows.push(pl);
            ups.push(pu);
            continue;
        }
        match split_with_floor(&cell, 2) {
            Some(parts) => todo.extend(parts.into_iter().rev()),
            None => failures.push(CellFailure {
                lo: cell.lo_coords(&grid),
                hi: cell.hi_coords(&grid),
                reason: "strict bracket fails at the minimal cell width".into(),
            }),
        }
    }
    if !failures.is_empty() {
        return Err(SolverError::BracketUnattainable { cells: failures });
    }
    let lower = assemble(cells.clone(), lows, &grid)?;
    let upper = assemble(cells, ups, &grid)?;
    let certificate = apeq_certificate(sys, &lower, &upper, eps)?;
    Ok(GlobalPair {
        lower,
        upper,
        certificate,
    })
}

/// Re-verifies the pair through the assembled operator images.
pub(crate) fn apeq_certificate(
    sys: &PdeSystem,
    lower: &PiecewisePoly,
    upper: &PiecewisePoly,
    eps: f64,
) -> Result<ApEqCertificate, SolverError> {
    let dom = lower.domain().union_skeleton(upper.domain())?;
    let dom = Arc::new(dom);
    let tu = sys.apply_operator(lower, &dom)?;
    let tv = sys.apply_operator(upper, &dom)?;
    let f = sys.sample_rhs(&dom)?;
    let mut c = ApEqCertificate {
        eps,
        lower_floor: f64::INFINITY,
        lower_ceiling: f64::INFINITY,
        upper_floor: f64::INFINITY,
        upper_ceiling: f64::INFINITY,
        points: 0,
        pass: false,
    };
    for j in 0..sys.k() {
        for (p, fv) in f[j].off_skeleton() {
            let (u, v) = (tu[j].value(p), tv[j].value(p));
            c.lower_floor = c.lower_floor.min(u - (fv - eps));
            c.lower_ceiling = c.lower_ceiling.min(fv - u);
            c.upper_floor = c.upper_floor.min(v - fv);
            c.upper_ceiling = c.upper_ceiling.min(fv + eps - v);
            c.points += 1;
        }
    }
    // strictness is judged on the inequalities themselves, not on the
    // rounded differences
    let strict = (0..sys.k()).all(|j| {
        f[j].off_skeleton().all(|(p, fv)| {
            let (u, v) = (tu[j].value(p), tv[j].value(p));
            fv - eps < u && u < fv && fv < v && v < fv + eps
        })
    });
    c.pass = strict && c.points > 0;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Signature;

    #[test]
    fn affine_pair_is_a_single_cell() {
        let sys = PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)]"],
            &["1"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let g = GridDomain::uniform(vec![0.0], vec![1.0], 33).unwrap();
        let pair = global_pair(&sys, &g, 0.2, Some(2.0), &JetSolveOptions::default()).unwrap();
        assert_eq!(pair.lower.cells().len(), 1);
        assert!(pair.certificate.pass);
        let dom = pair.skeleton().clone();
        let tu = &sys.apply_operator(&pair.lower, &dom).unwrap()[0];
        let tv = &sys.apply_operator(&pair.upper, &dom).unwrap()[0];
        assert!(tu.values().iter().all(|&v| v == 0.9));
        assert!(tv.values().iter().all(|&v| v == 1.1));
    }

    #[test]
    fn tiny_eps_fails_with_diagnostics() {
        let sys = PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)]"],
            &["1"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let g = GridDomain::uniform(vec![0.0], vec![1.0], 17).unwrap();
        match global_pair(&sys, &g, 1e-20, None, &JetSolveOptions::default()) {
            Err(SolverError::BracketUnattainable { cells }) => assert!(!cells.is_empty()),
            other => panic!("{other:?}"),
        }
    }
}
