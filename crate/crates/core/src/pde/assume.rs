//! Sampling heuristics for the solvability assumptions.
//!
//! The image `{F(x, ξ) - f(x)}` is sampled and the radius of the largest
//! origin-centred ball inside its convex hull is estimated as the minimum
//! of the support function `h(d) = max_s <y_s, d>` over unit directions
//! `d`. The minimum is searched from the `2K` axis directions and a few
//! random ones, each refined by projected subgradient descent on the
//! sphere so that flat images are caught. None of this is a proof.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{PdeError, PdeSystem};
use crate::expr::Interval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub samples: usize,
    pub random_directions: usize,
    pub descent_steps: usize,
    /// Smallest witnessed radius that counts as support.
    pub r_min: f64,
    /// Seed residual accepted by [`check_assumption_open`].
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            samples: 256,
            random_directions: 8,
            descent_steps: 250,
            r_min: 1e-6,
            residual_tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionVerdict {
    pub supported: bool,
    /// Witnessed ball radius around `f(x)` (negative: `f(x)` outside).
    pub radius: f64,
    /// Direction attaining the smallest support value.
    pub worst_direction: Vec<f64>,
    pub samples: usize,
    /// Samples dropped because `F` was undefined there.
    pub domain_failures: usize,
    /// Always `true`: this is sampling evidence only.
    pub heuristic: bool,
}

fn verdict(
    images: &[Vec<f64>],
    k: usize,
    dropped: usize,
    opts: &ProbeOptions,
    rng: &mut ChaCha8Rng,
) -> AssumptionVerdict {
    let (radius, dir) = if images.is_empty() {
        (f64::NEG_INFINITY, vec![0.0; k])
    } else {
        min_support(images, k, opts, rng)
    };
    AssumptionVerdict {
        supported: radius >= opts.r_min,
        radius,
        worst_direction: dir,
        samples: images.len(),
        domain_failures: dropped,
        heuristic: true,
    }
}

fn support(images: &[Vec<f64>], d: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (s, y) in images.iter().enumerate() {
        let v: f64 = y.iter().zip(d).map(|(a, b)| a * b).sum();
        if v > best.0 {
            best = (v, s);
        }
    }
    best
}

fn unit(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= n);
    Some(v)
}

fn min_support(
    images: &[Vec<f64>],
    k: usize,
    opts: &ProbeOptions,
    rng: &mut ChaCha8Rng,
) -> (f64, Vec<f64>) {
    let mut starts = Vec::new();
    for j in 0..k {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; k];
            d[j] = sign;
            starts.push(d);
        }
    }
    if k > 1 {
        for _ in 0..opts.random_directions {
            let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
            if let Some(d) = unit(g) {
                starts.push(d);
            }
        }
    }
    let mut best = (f64::INFINITY, starts[0].clone());
    for start in starts {
        let mut d = start;
        let (mut h, mut arg) = support(images, &d);
        if h < best.0 {
            best = (h, d.clone());
        }
        if k == 1 {
            continue;
        }
        for t in 0..opts.descent_steps {
            // subgradient of h at d is the maximizing image point
            let Some(g) = unit(images[arg].clone()) else {
                break;
            };
            let step = 0.5 * 0.93f64.powi(t as i32);
            let Some(next) = unit(d.iter().zip(&g).map(|(a, b)| a - step * b).collect()) else {
                break;
            };
            d = next;
            (h, arg) = support(images, &d);
            if h < best.0 {
                best = (h, d.clone());
            }
        }
    }
    best
}

/// Is `f(x)` interior to `{F(x, ξ) : ξ ∈ trial_box}`? Boxes must be
/// bounded.
pub fn check_assumption_interior(
    sys: &PdeSystem,
    x: &[f64],
    trial_box: &[Interval],
    opts: &ProbeOptions,
) -> Result<AssumptionVerdict, PdeError> {
    let m = sys.jet_dim();
    if trial_box.len() != m {
        return Err(PdeError::Dimension {
            got: trial_box.len(),
            expected: m,
        });
    }
    if trial_box
        .iter()
        .any(|i| !(i.lo().is_finite() && i.hi().is_finite()))
    {
        return Err(PdeError::Box("trial box must be bounded".into()));
    }
    let f = sys.rhs_at(x).map_err(|source| PdeError::Expr {
        key: "f".into(),
        source,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut images = Vec::with_capacity(opts.samples + 2 * m + 1);
    let mut dropped = 0;
    let mut push = |xi: &[f64], images: &mut Vec<Vec<f64>>| match sys.apply_operator_point(x, xi) {
        Ok(y) => images.push(y.iter().zip(&f).map(|(a, b)| a - b).collect()),
        Err(_) => dropped += 1,
    };
    let mid: Vec<f64> = trial_box.iter().map(Interval::mid).collect();
    push(&mid, &mut images);
    for s in 0..m {
        for end in [trial_box[s].lo(), trial_box[s].hi()] {
            let mut xi = mid.clone();
            xi[s] = end;
            push(&xi, &mut images);
        }
    }
    for _ in 0..opts.samples {
        let xi: Vec<f64> = trial_box
            .iter()
            .map(|i| {
                if i.width() > 0.0 {
                    rng.gen_range(i.lo()..=i.hi())
                } else {
                    i.lo()
                }
            })
            .collect();
        push(&xi, &mut images);
    }
    Ok(verdict(&images, sys.k(), dropped, opts, &mut rng))
}

/// Does `F` map `B_δ(x) × B_ε(ξ)` onto a neighbourhood of `f`? Measured
/// through `F(x', ξ') - f(x')`, with `x'` restricted to the system box.
pub fn check_assumption_open(
    sys: &PdeSystem,
    x: &[f64],
    xi: &[f64],
    delta: f64,
    eps: f64,
    opts: &ProbeOptions,
) -> Result<AssumptionVerdict, PdeError> {
    let m = sys.jet_dim();
    if xi.len() != m {
        return Err(PdeError::Dimension {
            got: xi.len(),
            expected: m,
        });
    }
    let eval_err = |source| PdeError::Expr {
        key: "F".into(),
        source,
    };
    let f0 = sys.rhs_at(x).map_err(eval_err)?;
    let y0 = sys.apply_operator_point(x, xi).map_err(eval_err)?;
    let residual = y0
        .iter()
        .zip(&f0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let tol = opts.residual_tol * (1.0 + f0.iter().map(|v| v.abs()).fold(0.0, f64::max));
    if residual > tol {
        return Err(PdeError::ResidualTooLarge { residual, tol });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut images = Vec::with_capacity(opts.samples + 2 * m);
    let mut dropped = 0;
    let mut push = |xp: &[f64], xip: &[f64], images: &mut Vec<Vec<f64>>| match (
        sys.apply_operator_point(xp, xip),
        sys.rhs_at(xp),
    ) {
        (Ok(y), Ok(f)) => images.push(y.iter().zip(&f).map(|(a, b)| a - b).collect()),
        _ => dropped += 1,
    };
    for s in 0..m {
        for sign in [1.0, -1.0] {
            let mut p = xi.to_vec();
            p[s] += sign * eps;
            push(x, &p, &mut images);
        }
    }
    for _ in 0..opts.samples {
        let xp: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(a, &c)| {
                let lo = (c - delta).max(sys.lo()[a]);
                let hi = (c + delta).min(sys.hi()[a]);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    c
                }
            })
            .collect();
        // uniform in the ε-ball
        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let Some(dir) = unit(g) else { continue };
        let r = eps * rng.gen::<f64>().powf(1.0 / m as f64);
        let xip: Vec<f64> = xi.iter().zip(&dir).map(|(c, d)| c + r * d).collect();
        push(&xp, &xip, &mut images);
    }
    Ok(verdict(&images, sys.k(), dropped, opts, &mut rng))
}
