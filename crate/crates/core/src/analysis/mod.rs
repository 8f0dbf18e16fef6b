//! Order-interval pushforward through `F`, nested-interval limits and
//! comparison of scheme runs against a reference solution.
//!
//! [`interval_pushforward`] replaces the exact pointwise `inf`/`sup` of
//! `F_j` over a box of jets by the outer enclosure of natural interval
//! arithmetic, so its outputs always contain every selection but may be
//! wider than the true range. [`sampled_range`] gives an inner estimate to
//! set beside it.

mod reference;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{ExprError, Interval};
use crate::nlsc::{normalize, GridDomain, GridFunction, NlscError, OrderInterval};
use crate::pde::{PdeError, PdeSystem};
use crate::solver::SolverError;

pub use reference::{compare_reference, stage_distances, ReferenceReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("F{} undefined over the jet box at grid point {point}: {source}", .output + 1)]
    Domain {
        point: usize,
        output: usize,
        source: ExprError,
    },
    #[error("expected {expected} order intervals, got {got}")]
    Count { expected: usize, got: usize },
    #[error("order intervals live on different grids")]
    GridMismatch,
    #[error("sequence not nested: interval {component} of term {index} leaves term {} at grid point {point}", .index - 1)]
    NotNested {
        index: usize,
        component: usize,
        point: usize,
    },
    #[error("empty interval sequence")]
    Empty,
    #[error(transparent)]
    Nlsc(#[from] NlscError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Terms `n = 1, 2, ...`, each an `M`-tuple of order intervals on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSequence {
    terms: Vec<Vec<OrderInterval>>,
}

impl IntervalSequence {
    /// Checks shapes and grids only; nestedness is what
    /// [`nested_limit_check`] examines.
    pub fn new(terms: Vec<Vec<OrderInterval>>) -> Result<Self, AnalysisError> {
        let first = terms.first().ok_or(AnalysisError::Empty)?;
        let width = first.len();
        let dom = first.first().ok_or(AnalysisError::Empty)?.domain().clone();
        for t in &terms {
            if t.len() != width {
                return Err(AnalysisError::Count {
                    expected: width,
                    got: t.len(),
                });
            }
            if t.iter().any(|i| **i.domain() != *dom) {
                return Err(AnalysisError::GridMismatch);
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Vec<OrderInterval>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn components(&self) -> usize {
        self.terms[0].len()
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.terms[0][0].domain()
    }
}

/// `[u - 1/n, u + 1/n]` for `n = 1..=count`, normalized.
pub fn shifted_envelopes(
    u: &GridFunction,
    count: usize,
) -> Result<IntervalSequence, AnalysisError> {
    let terms = (1..=count)
        .map(|n| {
            let d = 1.0 / n as f64;
            let lo = normalize(&u.map(|v| v - d)?);
            let hi = normalize(&u.map(|v| v + d)?);
            Ok(vec![OrderInterval::new(lo, hi)?])
        })
        .collect::<Result<_, AnalysisError>>()?;
    IntervalSequence::new(terms)
}

fn check_inputs(
    sys: &PdeSystem,
    intervals: &[OrderInterval],
) -> Result<Arc<GridDomain>, AnalysisError> {
    if intervals.len() != sys.jet_dim() {
        return Err(AnalysisError::Count {
            expected: sys.jet_dim(),
            got: intervals.len(),
        });
    }
    let dom = intervals[0].domain().clone();
    if intervals.iter().any(|i| **i.domain() != *dom) {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(dom)
}

/// Encloses `F_j(x, ∏ [lowerᵢ(x), upperᵢ(x)])` at every unmarked point.
///
/// Each output is normalized; skeleton values come from the neighbours.
pub fn interval_pushforward(
    sys: &PdeSystem,
    intervals: &[OrderInterval],
) -> Result<Vec<OrderInterval>, AnalysisError> {
    let dom = check_inputs(sys, intervals)?;
    let k = sys.k();
    let (mut lo, mut hi) = (vec![vec![0.0; dom.len()]; k], vec![vec![0.0; dom.len()]; k]);
    let mut jet = vec![Interval::point(0.0); intervals.len()];
    for p in 0..dom.len() {
        if dom.is_skeleton(p) {
            continue;
        }
        let x: Vec<Interval> = dom.point(p).into_iter().map(Interval::point).collect();
        for (s, i) in intervals.iter().enumerate() {
            jet[s] = Interval::new(i.lower().value(p), i.upper().value(p))
                .ok_or(NlscError::InvertedInterval { point: p })?;
        }
        for (j, e) in sys.ops().iter().enumerate() {
            let y = e
                .eval_interval(&x, &jet)
                .map_err(|source| AnalysisError::Domain {
                    point: p,
                    output: j,
                    source,
                })?;
            lo[j][p] = y.lo();
            hi[j][p] = y.hi();
        }
    }
    lo.into_iter()
        .zip(hi)
        .map(|(l, h)| {
            let l = normalize(&GridFunction::new(dom.clone(), l)?);
            let h = normalize(&GridFunction::new(dom.clone(), h)?);
            Ok(OrderInterval::new(l, h)?)
        })
        .collect()
}

/// Per-point `(min, max)` tables for one output.
pub type RangeTable = (Vec<f64>, Vec<f64>);

/// Inner estimate of the pushforward: per output and unmarked point, the
/// min and max of `F_j` over `samples` uniform jets from the input box
/// (corners included). Skeleton entries are `NaN`.
pub fn sampled_range(
    sys: &PdeSystem,
    intervals: &[OrderInterval],
    samples: usize,
    seed: u64,
) -> Result<Vec<RangeTable>, AnalysisError> {
    let dom = check_inputs(sys, intervals)?;
    let k = sys.k();
    let m = intervals.len();
    let mut out = vec![(vec![f64::NAN; dom.len()], vec![f64::NAN; dom.len()]); k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jet = vec![0.0; m];
    for p in 0..dom.len() {
        if dom.is_skeleton(p) {
            continue;
        }
        let x = dom.point(p);
        let corners = if m <= 10 { 1usize << m } else { 0 };
        for t in 0..corners + samples {
            for (s, i) in intervals.iter().enumerate() {
                let (l, u) = (i.lower().value(p), i.upper().value(p));
                jet[s] = if t < corners {
                    if t >> s & 1 == 0 {
                        l
                    } else {
                        u
                    }
                } else {
                    l + (u - l) * rng.gen::<f64>()
                };
            }
            let y = sys
                .apply_operator_point(&x, &jet)
                .map_err(|source| AnalysisError::Domain {
                    point: p,
                    output: 0,
                    source,
                })?;
            for (j, v) in y.into_iter().enumerate() {
                let (lo, hi) = &mut out[j];
                lo[p] = if lo[p].is_nan() { v } else { lo[p].min(v) };
                hi[p] = if hi[p].is_nan() { v } else { hi[p].max(v) };
            }
        }
    }
    Ok(out)
}

/// Per-component outcome of [`nested_limit_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum LimitVerdict {
    /// Final widths are below `tol` at every unmarked point; the limit
    /// candidate is the normalized midpoint of the final interval.
    Converges { limit: GridFunction, max_width: f64 },
    /// Final widths reach `tol` on `points`, spanning the index box
    /// `[lo, hi]`.
    Slow {
        points: Vec<usize>,
        lo: Vec<usize>,
        hi: Vec<usize>,
        max_width: f64,
    },
}

impl LimitVerdict {
    pub fn converges(&self) -> bool {
        matches!(self, LimitVerdict::Converges { .. })
    }
}

/// Nestedness check followed by a per-component width test of the last
/// term.
pub fn nested_limit_check(
    seq: &IntervalSequence,
    tol: f64,
) -> Result<Vec<LimitVerdict>, AnalysisError> {
    let dom = seq.domain().clone();
    for (n, pair) in seq.terms().windows(2).enumerate() {
        for (c, (outer, inner)) in pair[0].iter().zip(&pair[1]).enumerate() {
            if !outer.contains(inner) {
                let point = (0..dom.len())
                    .find(|&p| {
                        !dom.is_skeleton(p)
                            && (inner.lower().value(p) < outer.lower().value(p)
                                || inner.upper().value(p) > outer.upper().value(p))
                    })
                    .unwrap_or(0);
                return Err(AnalysisError::NotNested {
                    index: n + 2,
                    component: c,
                    point,
                });
            }
        }
    }
    let last = seq.terms().last().expect("non-empty");
    last.iter()
        .map(|iv| {
            let width = iv.width();
            let mut max_width = 0.0f64;
            let mut points = Vec::new();
            for p in (0..dom.len()).filter(|&p| !dom.is_skeleton(p)) {
                max_width = max_width.max(width[p]);
                if !(width[p] < tol) {
                    points.push(p);
                }
            }
            if points.is_empty() {
                let mid = iv.lower().zip_with(iv.upper(), |l, u| 0.5 * (l + u))?;
                return Ok(LimitVerdict::Converges {
                    limit: normalize(&mid),
                    max_width,
                });
            }
            let mut lo = vec![usize::MAX; dom.dim()];
            let mut hi = vec![0; dom.dim()];
            for &p in &points {
                for (a, i) in dom.multi_index(p).into_iter().enumerate() {
                    lo[a] = lo[a].min(i);
                    hi[a] = hi[a].max(i);
                }
            }
            Ok(LimitVerdict::Slow {
                points,
                lo,
                hi,
                max_width,
            })
        })
        .collect()
}
