use std::sync::Arc;

use serde::Serialize;

use super::tiling::{cell_diameter, split_with_floor};
use super::{jet_solve, CellFailure, JetSolveOptions, SolverError, Tiling};
use crate::expr::Interval;
use crate::jets::{assemble, taylor_poly, Cell, PiecewisePoly, Polynomial};
use crate::nlsc::{normalize, GridDomain, GridFunction};
use crate::pde::{check_assumption_open, ExactSolution, PdeSystem, ProbeOptions};

/// Shrink applied to the nominal band radius `2ε/n` so that the width
/// bound `μ - λ < 4ε/n` holds strictly after rounding.
const BAND_SHRINK: f64 = 63.0 / 64.0;

/// Halvings of `ε_max` tried before openness is declared unwitnessed.
const EPS_HALVINGS: usize = 20;

/// Everything a stage needs besides the previous stage.
#[derive(Debug, Clone)]
pub struct StageContext<'a> {
    pub sys: &'a PdeSystem,
    pub tiling: &'a Tiling,
    pub gamma: f64,
    pub eps_max: f64,
    /// Used only to seed the stage-1 jet solves.
    pub exact: Option<&'a ExactSolution>,
    pub jet: JetSolveOptions,
    pub probe: ProbeOptions,
}

/// Margins of the three stage inequalities; positive means strict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    /// `min (T V_n - (f - γ/n))` over unmarked points.
    pub bracket_lower: f64,
    /// `min (f - T V_n)` over unmarked points.
    pub bracket_upper: f64,
    pub bracket: bool,
    /// `min` of `λ_n - λ_{n-1}` and `μ_{n-1} - μ_n` over I-cells and slots
    /// (`+inf` at stage 1).
    pub nesting: f64,
    /// `min` of `D^α V_n - λ_n` and `μ_n - D^α V_n` over unmarked points.
    pub containment: f64,
    pub nested: bool,
    /// `min (4ε/n - (μ_n - λ_n))` over I-cells and slots.
    pub width_margin: f64,
    /// `max (μ_n - λ_n) / (4ε/n)`.
    pub width_ratio: f64,
    pub narrow: bool,
    /// First failing inequality, for diagnostics.
    pub first_failure: Option<String>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.bracket && self.nested && self.narrow
    }
}

/// Stage `n` of the scheme: `V_n` with its per-I-cell bands.
#[derive(Debug, Clone)]
pub struct RefinementStage {
    pub n: usize,
    pub gamma: f64,
    pub v: PiecewisePoly,
    /// The I-cells the bands are constant on.
    pub i_cells: Vec<Cell>,
    /// `ε_{ν,j}` per I-cell.
    pub eps: Vec<f64>,
    /// Anchor jet per I-cell, in slot order.
    pub anchor_jets: Vec<Vec<f64>>,
    /// `λ_n` per I-cell and slot.
    pub lower: Vec<Vec<f64>>,
    /// `μ_n` per I-cell and slot.
    pub upper: Vec<Vec<f64>>,
    /// I-cell index of each cell of `v`.
    pub parent: Vec<usize>,
    pub certificate: Certificate,
}

impl RefinementStage {
    /// Band `(λ_n, μ_n)` for one slot as step functions on `grid`, whose
    /// skeleton must contain the I-cell boundaries.
    pub fn band(
        &self,
        slot: usize,
        grid: &Arc<GridDomain>,
    ) -> Result<(GridFunction, GridFunction), SolverError> {
        let owner = i_cell_owner(&self.i_cells, grid)?;
        let pick = |b: &Vec<Vec<f64>>| -> Result<GridFunction, SolverError> {
            let vals = owner
                .iter()
                .map(|o| o.map_or(0.0, |i| b[i][slot]))
                .collect();
            Ok(normalize(&GridFunction::new(grid.clone(), vals)?))
        };
        Ok((pick(&self.lower)?, pick(&self.upper)?))
    }
}

/// Index of the I-cell containing each unmarked point of `grid`; errors if
/// an unmarked point sits on an I-cell boundary.
pub fn i_cell_owner(cells: &[Cell], grid: &GridDomain) -> Result<Vec<Option<usize>>, SolverError> {
    let mut owner = vec![None; grid.len()];
    for (i, c) in cells.iter().enumerate() {
        for p in c.interior_points(grid) {
            owner[p] = Some(i);
        }
    }
    if let Some(p) = (0..grid.len()).find(|&p| !grid.is_skeleton(p) && owner[p].is_none()) {
        return Err(SolverError::InvalidArgument(format!(
            "grid point {p} is unmarked but lies on an I-cell boundary"
        )));
    }
    Ok(owner)
}

fn jet_box(lo: &[f64], hi: &[f64], frac: f64) -> Vec<Interval> {
    lo.iter()
        .zip(hi)
        .map(|(&l, &h)| {
            let m = (h - l) * frac;
            Interval::new(l + m, h - m).unwrap_or(Interval::point(0.5 * (l + h)))
        })
        .collect()
}

/// Builds stage `n` from stage `n - 1` (`prev`, required iff `n > 1`).
///
/// Per I-cell: an anchor jet at `f(a) - γ/(2n)` inside the inner eighth of
/// the previous band, a new band of radius `2ε/n` around it clipped into
/// the previous one, then J-cells halved until `f - γ/n < T V_n < f` and
/// `λ_n <= D^α V_n <= μ_n` hold at their interior grid points.
pub fn refine(
    ctx: &StageContext<'_>,
    prev: Option<&RefinementStage>,
    n: usize,
) -> Result<RefinementStage, SolverError> {
    match (n, prev) {
        (0, _) => {
            return Err(SolverError::InvalidArgument(
                "stage index starts at 1".into(),
            ))
        }
        (1, Some(_)) => {
            return Err(SolverError::InvalidArgument(
                "stage 1 takes no previous stage".into(),
            ))
        }
        (n, None) if n > 1 => {
            return Err(SolverError::InvalidArgument(format!(
                "stage {n} needs stage {}",
                n - 1
            )))
        }
        (n, Some(p)) if p.n + 1 != n => {
            return Err(SolverError::InvalidArgument(format!(
                "stage {n} built on stage {}",
                p.n
            )))
        }
        _ => {}
    }
    if !(ctx.gamma > 0.0 && ctx.gamma.is_finite()) {
        return Err(SolverError::InvalidArgument(format!(
            "γ must be positive, got {}",
            ctx.gamma
        )));
    }
    let sys = ctx.sys;
    let grid = ctx.tiling.grid().clone();
    let nf = n as f64;
    let shift = ctx.gamma / (2.0 * nf);
    let i_cells = &ctx.tiling.cells;

    let mut eps = Vec::with_capacity(i_cells.len());
    let mut anchor_jets = Vec::with_capacity(i_cells.len());
    let mut lower = Vec::with_capacity(i_cells.len());
    let mut upper = Vec::with_capacity(i_cells.len());
    let mut cells = Vec::new();
    let mut polys = Vec::new();
    let mut parent = Vec::new();

    for (i, cell) in i_cells.iter().enumerate() {
        let wrap = |e: SolverError| SolverError::Stage {
            stage: n,
            cell: i,
            source: Box::new(e),
        };
        let a = &ctx.tiling.anchors[i];
        let fa = sys.rhs_at(a).map_err(|e| wrap(e.into()))?;
        let target: Vec<f64> = fa.iter().map(|v| v - shift).collect();

        let (e_c, c, lam, mu) = match prev {
            None => {
                let exact = match ctx.exact {
                    Some(u) => Some(u.jet_values(a).map_err(|e| wrap(e.into()))?),
                    None => None,
                };
                let xi = jet_solve(sys, a, &fa, exact.as_deref(), None, &ctx.jet).map_err(wrap)?;
                let e_c = openness_radius(ctx, a, xi.values(), cell_diameter(&grid, cell) / 2.0)
                    .map_err(wrap)?;
                let seed = exact.unwrap_or_else(|| xi.values().to_vec());
                let c = jet_solve(sys, a, &target, Some(&seed), None, &ctx.jet)
                    .map_err(wrap)?
                    .values()
                    .to_vec();
                let r = 2.0 * e_c / nf * BAND_SHRINK;
                let lam = c.iter().map(|v| v - r).collect();
                let mu = c.iter().map(|v| v + r).collect();
                (e_c, c, lam, mu)
            }
            Some(p) => {
                let e_c = p.eps[i];
                let (pl, pu) = (&p.lower[i], &p.upper[i]);
                let bx = jet_box(pl, pu, 1.0 / 8.0);
                let c = jet_solve(
                    sys,
                    a,
                    &target,
                    Some(&p.anchor_jets[i]),
                    Some(&bx),
                    &ctx.jet,
                )
                .map_err(wrap)?
                .values()
                .to_vec();
                let r = 2.0 * e_c / nf * BAND_SHRINK;
                let (mut lam, mut mu) = (Vec::new(), Vec::new());
                for s in 0..c.len() {
                    let m = (pu[s] - pl[s]) / 8.0;
                    lam.push((c[s] - r).max(pl[s] + m / 2.0));
                    mu.push((c[s] + r).min(pu[s] - m / 2.0));
                }
                (e_c, c, lam, mu)
            }
        };

        let bx = jet_box(&lam, &mu, 1.0 / 8.0);
        let mut todo = vec![cell.clone()];
        while let Some(j) = todo.pop() {
            let b = j.center(&grid);
            let fb = sys.rhs_at(&b).map_err(|e| wrap(e.into()))?;
            let tb: Vec<f64> = fb.iter().map(|v| v - shift).collect();
            let solved = jet_solve(sys, &b, &tb, Some(&c), Some(&bx), &ctx.jet);
            let ok = match &solved {
                Ok(jet) => {
                    let p = taylor_poly(jet);
                    let good = j_cell_holds(sys, &grid, &j, &p, ctx.gamma / nf, &lam, &mu);
                    good.then_some(p)
                }
                Err(_) => None,
            };
            if let Some(p) = ok {
                cells.push(j);
                polys.push(p);
                parent.push(i);
                continue;
            }
            match split_with_floor(&j, 2) {
                Some(parts) => todo.extend(parts.into_iter().rev()),
                None => {
                    return Err(wrap(match solved {
                        Err(e) => e,
                        Ok(_) => SolverError::BracketUnattainable {
                            cells: vec![CellFailure {
                                lo: j.lo_coords(&grid),
                                hi: j.hi_coords(&grid),
                                reason:
                                    "bracket or band containment fails at the minimal cell width"
                                        .into(),
                            }],
                        },
                    }))
                }
            }
        }
        eps.push(e_c);
        anchor_jets.push(c);
        lower.push(lam);
        upper.push(mu);
    }

    let v = assemble(cells, polys, &grid)?;
    let mut stage = RefinementStage {
        n,
        gamma: ctx.gamma,
        v,
        i_cells: i_cells.clone(),
        eps,
        anchor_jets,
        lower,
        upper,
        parent,
        certificate: Certificate {
            bracket_lower: 0.0,
            bracket_upper: 0.0,
            bracket: false,
            nesting: 0.0,
            containment: 0.0,
            nested: false,
            width_margin: 0.0,
            width_ratio: 0.0,
            narrow: false,
            first_failure: None,
        },
    };
    stage.certificate = certify(sys, &stage, prev)?;
    Ok(stage)
}

/// Largest `ε_max / 2^k` for which the openness probe is supported.
fn openness_radius(
    ctx: &StageContext<'_>,
    a: &[f64],
    xi: &[f64],
    delta: f64,
) -> Result<f64, SolverError> {
    let mut e = ctx.eps_max;
    for _ in 0..=EPS_HALVINGS {
        if check_assumption_open(ctx.sys, a, xi, delta, e, &ctx.probe)?.supported {
            return Ok(e);
        }
        e /= 2.0;
    }
    Err(SolverError::OpennessUnwitnessed {
        anchor: a.to_vec(),
        eps_min: 2.0 * e,
    })
}

fn j_cell_holds(
    sys: &PdeSystem,
    grid: &GridDomain,
    cell: &Cell,
    polys: &[Polynomial],
    slack: f64,
    lam: &[f64],
    mu: &[f64],
) -> bool {
    let count = sys.set().count();
    let mut jet = vec![0.0; sys.jet_dim()];
    cell.interior_points(grid).into_iter().all(|p| {
        let x = grid.point(p);
        for (i, poly) in polys.iter().enumerate() {
            poly.derivs_at(&x, &mut jet[i * count..(i + 1) * count]);
        }
        if jet
            .iter()
            .zip(lam.iter().zip(mu))
            .any(|(v, (l, m))| !(l <= v && v <= m))
        {
            return false;
        }
        match (sys.apply_operator_point(&x, &jet), sys.rhs_at(&x)) {
            (Ok(t), Ok(f)) => t.iter().zip(&f).all(|(&t, &f)| f - slack < t && t < f),
            _ => false,
        }
    })
}

/// Re-evaluates the stage inequalities from the assembled `V_n` and the
/// stored bands.
pub(crate) fn certify(
    sys: &PdeSystem,
    stage: &RefinementStage,
    prev: Option<&RefinementStage>,
) -> Result<Certificate, SolverError> {
    let n = stage.n as f64;
    let slack = stage.gamma / n;
    let dom = stage.v.domain().clone();
    let owner = i_cell_owner(&stage.i_cells, &dom)?;
    let t = sys.apply_operator(&stage.v, &dom)?;
    let f = sys.sample_rhs(&dom)?;
    let mut first_failure = None;
    let mut note = |msg: String| {
        if first_failure.is_none() {
            first_failure = Some(msg);
        }
    };

    let (mut bracket_lower, mut bracket_upper, mut bracket) = (f64::INFINITY, f64::INFINITY, true);
    for j in 0..sys.k() {
        for (p, fv) in f[j].off_skeleton() {
            let tv = t[j].value(p);
            bracket_lower = bracket_lower.min(tv - (fv - slack));
            bracket_upper = bracket_upper.min(fv - tv);
            if !(fv - slack < tv && tv < fv) {
                if bracket {
                    note(format!(
                        "bracket fails for F{} at grid point {p}: T = {tv}, f = {fv}",
                        j + 1
                    ));
                }
                bracket = false;
            }
        }
    }

    let (mut nesting, mut nest_ok) = (f64::INFINITY, true);
    if let Some(p) = prev {
        for i in 0..stage.i_cells.len() {
            for s in 0..stage.lower[i].len() {
                let (l0, l1) = (p.lower[i][s], stage.lower[i][s]);
                let (u0, u1) = (p.upper[i][s], stage.upper[i][s]);
                nesting = nesting.min(l1 - l0).min(u0 - u1);
                if !(l0 < l1 && u1 < u0) {
                    if nest_ok {
                        note(format!("nesting fails in I-cell {i}, slot {s}"));
                    }
                    nest_ok = false;
                }
            }
        }
    }
    let (mut containment, mut contain_ok) = (f64::INFINITY, true);
    let mut jet = vec![0.0; sys.jet_dim()];
    for p in 0..dom.len() {
        if dom.is_skeleton(p) || !stage.v.jet_at(p, &mut jet) {
            continue;
        }
        let i = owner[p].expect("unmarked points lie inside an I-cell");
        for (s, &d) in jet.iter().enumerate() {
            let (l, u) = (stage.lower[i][s], stage.upper[i][s]);
            containment = containment.min(d - l).min(u - d);
            if !(l <= d && d <= u) {
                if contain_ok {
                    note(format!("containment fails at grid point {p}, slot {s}"));
                }
                contain_ok = false;
            }
        }
    }

    let (mut width_margin, mut width_ratio, mut narrow) = (f64::INFINITY, 0.0f64, true);
    for i in 0..stage.i_cells.len() {
        let bound = 4.0 * stage.eps[i] / n;
        for s in 0..stage.lower[i].len() {
            let w = stage.upper[i][s] - stage.lower[i][s];
            width_margin = width_margin.min(bound - w);
            width_ratio = width_ratio.max(w / bound);
            if !(w < bound) {
                if narrow {
                    note(format!(
                        "width bound fails in I-cell {i}, slot {s}: width {w} vs {bound}"
                    ));
                }
                narrow = false;
            }
        }
    }

    Ok(Certificate {
        bracket_lower,
        bracket_upper,
        bracket,
        nesting,
        containment,
        nested: nest_ok && contain_ok,
        width_margin,
        width_ratio,
        narrow,
        first_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Signature;
    use crate::solver::tile_domain;

    fn affine() -> PdeSystem {
        PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)]"],
            &["1"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn affine_stages_hit_the_shifted_target() {
        let sys = affine();
        let g = GridDomain::uniform(vec![0.0], vec![1.0], 33).unwrap();
        let tiling = tile_domain(&g, 2.0, 2).unwrap();
        let ctx = StageContext {
            sys: &sys,
            tiling: &tiling,
            gamma: 0.4,
            eps_max: 1.0,
            exact: None,
            jet: JetSolveOptions::default(),
            probe: ProbeOptions::default(),
        };
        let s1 = refine(&ctx, None, 1).unwrap();
        assert_eq!(s1.v.cells().len(), 1);
        assert!(s1.certificate.pass(), "{:?}", s1.certificate);
        let s2 = refine(&ctx, Some(&s1), 2).unwrap();
        assert!(s2.certificate.pass(), "{:?}", s2.certificate);
        for (s, n) in [(&s1, 1.0), (&s2, 2.0)] {
            let xi1 = s.anchor_jets[0][1];
            assert!((xi1 - (1.0 - 0.4 / (2.0 * n))).abs() < 1e-12);
            let w = s.upper[0][1] - s.lower[0][1];
            assert!(w < 4.0 * s.eps[0] / n && w > 3.5 * s.eps[0] / n);
        }
    }

    #[test]
    fn stage_order_is_enforced() {
        let sys = affine();
        let g = GridDomain::uniform(vec![0.0], vec![1.0], 9).unwrap();
        let tiling = tile_domain(&g, 2.0, 2).unwrap();
        let ctx = StageContext {
            sys: &sys,
            tiling: &tiling,
            gamma: 0.4,
            eps_max: 1.0,
            exact: None,
            jet: JetSolveOptions::default(),
            probe: ProbeOptions::default(),
        };
        assert!(matches!(
            refine(&ctx, None, 2),
            Err(SolverError::InvalidArgument(_))
        ));
        assert!(matches!(
            refine(&ctx, None, 0),
            Err(SolverError::InvalidArgument(_))
        ));
    }
}
