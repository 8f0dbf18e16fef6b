use serde::Serialize;

use super::{normalize, same_domain, GridFunction, NlscError};

/// Which link of the chain `λₙ ≤ λₙ₊₁ ≤ uₙ₊₁ ≤ μₙ₊₁ ≤ μₙ` broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderViolation {
    LowerNotIncreasing,
    UpperNotDecreasing,
    AboveUpper,
    BelowLower,
    LimitOutside,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderCertificate {
    pub stages: usize,
    /// First violation as `(n, grid point, kind)` with `n` 1-based.
    pub first_violation: Option<(usize, usize, OrderViolation)>,
    pub violation_count: usize,
    /// `max(u - λ_N)` over unmarked points.
    pub sup_gap: f64,
    /// `max(μ_N - u)` over unmarked points.
    pub inf_gap: f64,
    pub tol: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// Checks that `seq` is squeezed between an increasing `lambdas` and a
/// decreasing `mus`, and that both bound sequences close in on `u` to
/// within `tol` by the last stage.
///
/// Inequalities are checked exactly on unmarked points; `tol` defaults to
/// `1e-8 * (1 + ‖u‖∞)`.
pub fn order_convergence_check(
    seq: &[GridFunction],
    lambdas: &[GridFunction],
    mus: &[GridFunction],
    u: &GridFunction,
    tol: Option<f64>,
) -> Result<OrderCertificate, NlscError> {
    let n = seq.len();
    if n == 0 {
        return Err(NlscError::EmptySequence);
    }
    if lambdas.len() != n || mus.len() != n {
        return Err(NlscError::SequenceLength(format!(
            "{} terms, {} lower bounds, {} upper bounds",
            n,
            lambdas.len(),
            mus.len()
        )));
    }
    for g in seq.iter().chain(lambdas).chain(mus) {
        same_domain(g, u)?;
    }
    let tol = tol.unwrap_or(1e-8 * (1.0 + u.sup_norm()));

    let mut first = None;
    let mut count = 0usize;
    let mut note = |stage: usize, p: usize, kind: OrderViolation| {
        count += 1;
        if first.is_none() {
            first = Some((stage, p, kind));
        }
    };
    for k in 0..n {
        for (p, s) in seq[k].off_skeleton() {
            let (l, m) = (lambdas[k].value(p), mus[k].value(p));
            if k + 1 < n {
                if lambdas[k + 1].value(p) < l {
                    note(k + 1, p, OrderViolation::LowerNotIncreasing);
                }
                if mus[k + 1].value(p) > m {
                    note(k + 1, p, OrderViolation::UpperNotDecreasing);
                }
            }
            if s < l {
                note(k + 1, p, OrderViolation::BelowLower);
            }
            if s > m {
                note(k + 1, p, OrderViolation::AboveUpper);
            }
        }
    }
    let (mut sup_gap, mut inf_gap) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (p, v) in u.off_skeleton() {
        let (l, m) = (lambdas[n - 1].value(p), mus[n - 1].value(p));
        if v < l || v > m {
            note(n, p, OrderViolation::LimitOutside);
        }
        sup_gap = sup_gap.max(v - l);
        inf_gap = inf_gap.max(m - v);
    }
    let monotone = count == 0;
    Ok(OrderCertificate {
        stages: n,
        first_violation: first,
        violation_count: count,
        sup_gap,
        inf_gap,
        tol,
        monotone,
        pass: monotone && sup_gap < tol && inf_gap < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiUniformReport {
    /// Unmarked grid points where no term of the sequence gets within `eps`.
    pub exceptional: Vec<usize>,
    /// Minimal 1-based `N` per grid point; `None` on the exceptional set
    /// and at skeleton points.
    pub n_map: Vec<Option<usize>>,
    /// `true` when the sequence decreases to `u`, `false` when it increases.
    pub decreasing: bool,
    pub nowhere_dense: bool,
}

impl QuasiUniformReport {
    pub fn max_n(&self) -> Option<usize> {
        self.n_map.iter().flatten().copied().max()
    }
}

/// Locates the points where a monotone sequence fails to come within `eps`
/// of its limit `u`, and the first index that does elsewhere.
///
/// The direction of monotonicity is detected from the data; an input that
/// is neither increasing nor decreasing off the skeleton is an error.
pub fn quasi_uniform_check(
    seq: &[GridFunction],
    u: &GridFunction,
    eps: f64,
) -> Result<QuasiUniformReport, NlscError> {
    if seq.is_empty() {
        return Err(NlscError::EmptySequence);
    }
    for g in seq {
        same_domain(g, u)?;
    }
    let decreasing = monotone_direction(seq)?;
    let d = u.domain();
    let mut n_map = vec![None; d.len()];
    let mut exceptional = Vec::new();
    let mut marked = vec![false; d.len()];
    for (p, limit) in u.off_skeleton() {
        let hit = seq.iter().position(|g| {
            let gap = if decreasing {
                g.value(p) - limit
            } else {
                limit - g.value(p)
            };
            gap < eps
        });
        match hit {
            Some(k) => n_map[p] = Some(k + 1),
            None => {
                exceptional.push(p);
                marked[p] = true;
            }
        }
    }
    let nowhere_dense = d.nowhere_dense_violation(&marked).is_none();
    Ok(QuasiUniformReport {
        exceptional,
        n_map,
        decreasing,
        nowhere_dense,
    })
}

fn monotone_direction(seq: &[GridFunction]) -> Result<bool, NlscError> {
    let (mut up, mut down) = (None, None);
    for k in 1..seq.len() {
        for (p, v) in seq[k].off_skeleton() {
            let prev = seq[k - 1].value(p);
            if v > prev && up.is_none() {
                up = Some((k, p));
            }
            if v < prev && down.is_none() {
                down = Some((k, p));
            }
        }
    }
    match (up, down) {
        (Some(a), Some(b)) => {
            let (index, point) = a.max(b);
            Err(NlscError::NotMonotone { index, point })
        }
        (Some(_), None) => Ok(false),
        _ => Ok(true),
    }
}

/// Lipschitz regularizations of `u` with slopes `k`:
/// `λ_k(x) = min_y u(y) + k|x - y|` and `μ_k(x) = max_y u(y) - k|x - y|`
/// over unmarked `y`. For increasing slopes `λ_k` increases and `μ_k`
/// decreases; both are normalized.
pub fn lipschitz_envelopes(
    u: &GridFunction,
    slopes: &[f64],
) -> Result<(Vec<GridFunction>, Vec<GridFunction>), NlscError> {
    let d = u.domain();
    let pts: Vec<(Vec<f64>, f64)> = u.off_skeleton().map(|(p, v)| (d.point(p), v)).collect();
    let mut lower = Vec::with_capacity(slopes.len());
    let mut upper = Vec::with_capacity(slopes.len());
    for &k in slopes {
        let mut lo = Vec::with_capacity(d.len());
        let mut hi = Vec::with_capacity(d.len());
        for p in 0..d.len() {
            let x = d.point(p);
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for (y, v) in &pts {
                let r = x
                    .iter()
                    .zip(y)
                    .map(|(s, t)| (s - t) * (s - t))
                    .sum::<f64>()
                    .sqrt();
                a = a.min(v + k * r);
                b = b.max(v - k * r);
            }
            lo.push(a);
            hi.push(b);
        }
        lower.push(normalize(&GridFunction::new(d.clone(), lo)?));
        upper.push(normalize(&GridFunction::new(d.clone(), hi)?));
    }
    Ok((lower, upper))
}
