use super::{jet_solve, JetSolveOptions, SolverError};
use crate::jets::{taylor_poly, Jet, Polynomial};
use crate::nlsc::GridDomain;
use crate::pde::PdeSystem;

/// A jet at `x0`, its Taylor polynomials and the radius `δ` of the ball on
/// which the strict bracket was verified.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub jet: Jet,
    pub polys: Vec<Polynomial>,
    pub delta: f64,
}

/// `f - ε < T P < f` near `x0`, from a jet solved at `f(x0) - ε/2`.
pub fn local_lower(
    sys: &PdeSystem,
    grid: &GridDomain,
    x0: &[f64],
    eps: f64,
    opts: &JetSolveOptions,
) -> Result<LocalSolution, SolverError> {
    local(sys, grid, x0, eps, -1.0, opts)
}

/// `f < T P < f + ε` near `x0`, from a jet solved at `f(x0) + ε/2`.
pub fn local_upper(
    sys: &PdeSystem,
    grid: &GridDomain,
    x0: &[f64],
    eps: f64,
    opts: &JetSolveOptions,
) -> Result<LocalSolution, SolverError> {
    local(sys, grid, x0, eps, 1.0, opts)
}

/// Strict one-sided bracket: `sign < 0` asks for `f - ε < t < f`.
pub(crate) fn bracketed(t: f64, f: f64, eps: f64, sign: f64) -> bool {
    if sign < 0.0 {
        f - eps < t && t < f
    } else {
        f < t && t < f + eps
    }
}

fn local(
    sys: &PdeSystem,
    grid: &GridDomain,
    x0: &[f64],
    eps: f64,
    sign: f64,
    opts: &JetSolveOptions,
) -> Result<LocalSolution, SolverError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolverError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let f0 = sys.rhs_at(x0)?;
    let target: Vec<f64> = f0.iter().map(|v| v + sign * eps / 2.0).collect();
    let jet = jet_solve(sys, x0, &target, None, None, opts)?;
    let polys = taylor_poly(&jet);

    // distance to the nearest grid point where the bracket fails
    let mut d_fail = f64::INFINITY;
    let mut derivs = vec![0.0; sys.jet_dim()];
    let count = sys.set().count();
    for p in 0..grid.len() {
        let x = grid.point(p);
        for (i, poly) in polys.iter().enumerate() {
            poly.derivs_at(&x, &mut derivs[i * count..(i + 1) * count]);
        }
        let ok = match (sys.apply_operator_point(&x, &derivs), sys.rhs_at(&x)) {
            (Ok(t), Ok(f)) => t.iter().zip(&f).all(|(&t, &f)| bracketed(t, f, eps, sign)),
            _ => false,
        };
        if !ok {
            let d = x
                .iter()
                .zip(x0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d_fail = d_fail.min(d);
        }
    }
    let h = grid.min_spacing();
    let mut delta = h;
    if d_fail <= h {
        return Err(SolverError::BracketUnattainable {
            cells: vec![super::CellFailure {
                lo: x0.iter().map(|c| c - h).collect(),
                hi: x0.iter().map(|c| c + h).collect(),
                reason: format!("bracket fails within one grid spacing (distance {d_fail:e})"),
            }],
        });
    }
    // largest h·2^k below the failure distance, or covering the box
    while delta * 2.0 < d_fail && delta < grid.diameter() {
        delta *= 2.0;
    }
    Ok(LocalSolution { jet, polys, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Signature;

    fn affine() -> PdeSystem {
        PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)]"],
            &["1"],
            vec![-1.0],
            vec![1.0],
        )
        .unwrap()
    }

    fn manufactured() -> PdeSystem {
        PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)] + u[1,(0)]^3"],
            &["cos(x1) + sin(x1)^3"],
            vec![0.0],
            vec![3.0],
        )
        .unwrap()
    }

    #[test]
    fn affine_lower_and_upper_cover_the_box() {
        let sys = affine();
        let g = GridDomain::uniform(vec![-1.0], vec![1.0], 65).unwrap();
        let o = JetSolveOptions::default();
        let lo = local_lower(&sys, &g, &[0.0], 0.1, &o).unwrap();
        assert_eq!(lo.jet.values(), &[0.0, 0.95]);
        assert!(lo.delta >= g.diameter());
        let up = local_upper(&sys, &g, &[0.0], 0.1, &o).unwrap();
        assert_eq!(up.jet.values(), &[0.0, 1.05]);
    }

    #[test]
    fn manufactured_bracket_holds_pointwise_on_the_ball() {
        let sys = manufactured();
        let g = GridDomain::uniform(vec![0.0], vec![3.0], 257).unwrap();
        let o = JetSolveOptions::default();
        for sign in [-1.0, 1.0] {
            let s = local(&sys, &g, &[0.5], 0.1, sign, &o).unwrap();
            assert!(s.delta > 0.0 && s.delta < 3.0);
            for p in 0..g.len() {
                let x = g.point(p);
                if (x[0] - 0.5).abs() > s.delta {
                    continue;
                }
                let jet = [
                    s.polys[0].eval(&x),
                    crate::jets::deriv_eval(&s.polys[0], &crate::jets::MultiIndex(vec![1]), &x)
                        .unwrap(),
                ];
                let t = sys.apply_operator_point(&x, &jet).unwrap()[0];
                let f = sys.rhs_at(&x).unwrap()[0];
                assert!(bracketed(t, f, 0.1, sign), "x = {x:?}");
            }
        }
    }

    #[test]
    fn zero_eps_is_rejected() {
        let g = GridDomain::uniform(vec![-1.0], vec![1.0], 9).unwrap();
        assert!(matches!(
            local_lower(&affine(), &g, &[0.0], 0.0, &JetSolveOptions::default()),
            Err(SolverError::InvalidArgument(_))
        ));
    }
}
