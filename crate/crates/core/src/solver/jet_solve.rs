use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SolverError;
use crate::expr::Interval;
use crate::jets::Jet;
use crate::pde::PdeSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetSolveOptions {
    /// Accept when `‖F(x0, ξ) - target‖∞ < tol_residual · max(1, ‖target‖∞)`.
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Latin-hypercube starts used when no seed is given or the seed fails.
    pub multistart: usize,
    /// Half-width of the default search box `[-R, R]^M`.
    pub radius: f64,
    pub seed: u64,
}

impl Default for JetSolveOptions {
    fn default() -> Self {
        Self {
            tol_residual: 1e-9,
            max_iter: 60,
            multistart: 24,
            radius: 10.0,
            seed: 0,
        }
    }
}

struct Problem<'a> {
    sys: &'a PdeSystem,
    x0: &'a [f64],
    target: &'a [f64],
    lo: Vec<f64>,
    hi: Vec<f64>,
    tol: f64,
}

impl Problem<'_> {
    fn residual(&self, xi: &[f64]) -> Option<DVector<f64>> {
        let y = self.sys.apply_operator_point(self.x0, xi).ok()?;
        Some(DVector::from_iterator(
            y.len(),
            y.iter().zip(self.target).map(|(a, b)| a - b),
        ))
    }

    fn jacobian(&self, xi: &[f64], r: &DVector<f64>) -> DMatrix<f64> {
        let (k, m) = (self.sys.k(), self.sys.jet_dim());
        if let Ok(j) = self.sys.jacobian_at(self.x0, xi) {
            return DMatrix::from_row_slice(k, m, &j);
        }
        // symbolic derivative undefined here (e.g. abs at 0): forward differences
        let mut jac = DMatrix::zeros(k, m);
        let mut p = xi.to_vec();
        for s in 0..m {
            let h = 1e-7 * (1.0 + xi[s].abs());
            let dir = if xi[s] + h <= self.hi[s] { 1.0 } else { -1.0 };
            p[s] = xi[s] + dir * h;
            if let Some(rp) = self.residual(&p) {
                for j in 0..k {
                    jac[(j, s)] = (rp[j] - r[j]) / (dir * h);
                }
            }
            p[s] = xi[s];
        }
        jac
    }

    fn clamp(&self, xi: &mut [f64]) {
        for (s, v) in xi.iter_mut().enumerate() {
            *v = v.clamp(self.lo[s], self.hi[s]);
        }
    }

    /// Projected damped Gauss–Newton with minimum-norm steps.
    fn gauss_newton(&self, start: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
        let m = start.len();
        let mut xi = start.to_vec();
        self.clamp(&mut xi);
        let Some(mut r) = self.residual(&xi) else {
            return (xi, f64::INFINITY);
        };
        for _ in 0..max_iter {
            let rinf = r.amax();
            if rinf < self.tol {
                return (xi, rinf);
            }
            let jac = self.jacobian(&xi, &r);
            let mut free = vec![true; m];
            let mut dx = DVector::zeros(m);
            for _ in 0..=m {
                dx = min_norm_step(&jac, &r, &free);
                let mut changed = false;
                for s in 0..m {
                    let out = (xi[s] <= self.lo[s] && dx[s] < 0.0)
                        || (xi[s] >= self.hi[s] && dx[s] > 0.0);
                    if free[s] && out {
                        free[s] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            let r2 = r.norm();
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand: Vec<f64> = xi
                    .iter()
                    .zip(dx.iter())
                    .map(|(a, d)| a + alpha * d)
                    .collect();
                self.clamp(&mut cand);
                if let Some(rc) = self.residual(&cand) {
                    if rc.norm() < r2 {
                        accepted = Some((cand, rc));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((c, rc)) => {
                    xi = c;
                    r = rc;
                }
                None => break,
            }
        }
        let rinf = r.amax();
        (xi, rinf)
    }
}

fn min_norm_step(jac: &DMatrix<f64>, r: &DVector<f64>, free: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..free.len()).filter(|&s| free[s]).collect();
    let mut dx = DVector::zeros(free.len());
    if cols.is_empty() {
        return dx;
    }
    let sub = jac.select_columns(&cols);
    // full row rank: dx = -Jᵀ(JJᵀ)⁻¹r, exact on axis-aligned affine maps
    if sub.nrows() <= sub.ncols() {
        if let Some(ch) = (&sub * sub.transpose()).cholesky() {
            let d = ch.l_dirty().diagonal();
            let (dmin, dmax) = (d.min(), d.max());
            if dmin > 0.0 && dmin * dmin > 1e-12 * dmax * dmax {
                let step = -(sub.transpose() * ch.solve(r));
                for (c, &s) in cols.iter().enumerate() {
                    dx[s] = step[c];
                }
                return dx;
            }
        }
    }
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * (cols.len().max(r.len()) as f64);
    if let Ok(step) = svd.solve(&(-r), eps.max(f64::MIN_POSITIVE)) {
        for (c, &s) in cols.iter().enumerate() {
            dx[s] = step[c];
        }
    }
    dx
}

fn norm_then_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let na: f64 = a.iter().map(|v| v * v).sum();
    let nb: f64 = b.iter().map(|v| v * v).sum();
    na.total_cmp(&nb).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Finds `ξ` with `F(x0, ξ) ≈ target` inside `bounds` (slot order).
///
/// With a seed, Gauss–Newton from the seed is tried first and its result
/// returned if it converges. Otherwise the origin (projected into the box)
/// and a Latin-hypercube design over the box, or `[-R, R]^M`, are used as
/// starts; among converged candidates the one of least Euclidean norm, then
/// lexicographically least, wins.
pub fn jet_solve(
    sys: &PdeSystem,
    x0: &[f64],
    target: &[f64],
    seed: Option<&[f64]>,
    bounds: Option<&[Interval]>,
    opts: &JetSolveOptions,
) -> Result<Jet, SolverError> {
    let m = sys.jet_dim();
    if target.len() != sys.k() || target.iter().any(|t| !t.is_finite()) {
        return Err(SolverError::InvalidArgument(format!(
            "target {target:?} must be {} finite values",
            sys.k()
        )));
    }
    let (lo, hi) = match bounds {
        Some(b) if b.len() != m => {
            return Err(SolverError::InvalidArgument(format!(
                "constraint box has {} entries, need {m}",
                b.len()
            )))
        }
        Some(b) => (
            b.iter().map(Interval::lo).collect(),
            b.iter().map(Interval::hi).collect(),
        ),
        None => (vec![f64::NEG_INFINITY; m], vec![f64::INFINITY; m]),
    };
    let scale = target.iter().fold(1.0f64, |a, t| a.max(t.abs()));
    let prob = Problem {
        sys,
        x0,
        target,
        lo,
        hi,
        tol: opts.tol_residual * scale,
    };
    let wrap =
        |xi: Vec<f64>| Jet::new(sys.set().clone(), x0.to_vec(), xi).map_err(SolverError::from);

    let mut best_residual = f64::INFINITY;
    if let Some(s) = seed {
        if s.len() != m {
            return Err(SolverError::InvalidArgument(format!(
                "seed has {} entries, need {m}",
                s.len()
            )));
        }
        let (xi, res) = prob.gauss_newton(s, opts.max_iter);
        if res < prob.tol {
            return wrap(xi);
        }
        best_residual = res;
    }

    let mut starts = vec![vec![0.0; m]];
    let (slo, shi): (Vec<f64>, Vec<f64>) = (0..m)
        .map(|s| {
            let l = if prob.lo[s].is_finite() {
                prob.lo[s]
            } else {
                -opts.radius
            };
            let h = if prob.hi[s].is_finite() {
                prob.hi[s]
            } else {
                opts.radius
            };
            (l.min(h), h.max(l))
        })
        .unzip();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.multistart;
    let perms: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    for i in 0..n {
        starts.push(
            (0..m)
                .map(|s| {
                    slo[s] + (perms[s][i] as f64 + rng.gen::<f64>()) / n as f64 * (shi[s] - slo[s])
                })
                .collect(),
        );
    }
    let mut found: Option<Vec<f64>> = None;
    for st in &starts {
        let (xi, res) = prob.gauss_newton(st, opts.max_iter);
        best_residual = best_residual.min(res);
        if res < prob.tol && found.as_ref().is_none_or(|f| norm_then_lex(&xi, f).is_lt()) {
            found = Some(xi);
        }
    }
    match found {
        Some(xi) => wrap(xi),
        None => Err(SolverError::NoSolution {
            x: x0.to_vec(),
            target: target.to_vec(),
            best_residual,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Signature;

    fn sys(ops: &str) -> PdeSystem {
        PdeSystem::new(
            Signature::new(1, 1, 1),
            &[ops],
            &["0"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn affine_picks_minimal_norm() {
        let j = jet_solve(
            &sys("u[1,(1)]"),
            &[0.0],
            &[3.0],
            None,
            None,
            &JetSolveOptions::default(),
        )
        .unwrap();
        assert_eq!(j.values(), &[0.0, 3.0]);
    }

    #[test]
    fn constrained_cubic_against_grid_search() {
        let s = sys("u[1,(1)] + u[1,(0)]^3");
        let b = [
            Interval::new(0.0, 1.0).unwrap(),
            Interval::new(-10.0, 10.0).unwrap(),
        ];
        let j = jet_solve(
            &s,
            &[0.0],
            &[2.0],
            None,
            Some(&b),
            &JetSolveOptions::default(),
        )
        .unwrap();
        let (a, c) = (j.values()[0], j.values()[1]);
        assert!((c + a.powi(3) - 2.0).abs() < 1e-9 && (0.0..=1.0).contains(&a));
        // brute force over the box: the target is attained, and the chosen
        // candidate is no longer than the origin-started solution (0, 2)
        let attained = (0..=1000).any(|i| {
            let a = i as f64 / 1000.0;
            (2.0 - a.powi(3)).abs() <= 10.0
        });
        assert!(attained);
        assert!((a * a + c * c).sqrt() <= 2.0 + 1e-9);
    }

    #[test]
    fn reports_missing_solution() {
        let s = PdeSystem::new(
            Signature::new(1, 1, 0),
            &["u[1,(0)]^2"],
            &["-1"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        match jet_solve(&s, &[0.5], &[-1.0], None, None, &JetSolveOptions::default()) {
            Err(SolverError::NoSolution { best_residual, .. }) => {
                assert!(best_residual >= 1.0 - 1e-9)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_respected_and_nondifferentiable_points_fall_back() {
        let s = sys("u[1,(1)] + u[1,(0)]^3");
        let j = jet_solve(
            &s,
            &[0.0],
            &[1.0],
            Some(&[1.0, 0.1]),
            None,
            &JetSolveOptions::default(),
        )
        .unwrap();
        assert!((j.values()[0] - 1.0).abs() < 0.2);
        let a = sys("abs(u[1,(0)]) + u[1,(1)]");
        let j = jet_solve(
            &a,
            &[0.0],
            &[2.0],
            Some(&[0.0, 0.0]),
            None,
            &JetSolveOptions::default(),
        )
        .unwrap();
        let v = j.values();
        // tolerance scales with max(1, target)
        assert!((v[0].abs() + v[1] - 2.0).abs() < 2e-9, "{v:?}");
    }
}
