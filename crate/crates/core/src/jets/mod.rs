//! Jets and the Taylor polynomials that realise them.
//!
//! Polynomials are stored in the divided-power basis `(x - x0)^α / α!`
//! around their anchor `x0`, so the coefficient of `α` *is* the derivative
//! `D^α P(x0)`. Jet matching is therefore exact by construction.

mod piecewise;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use piecewise::{assemble, sample_component, Cell, PiecewisePoly, PiecewisePolyFile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("derivative order |{alpha}| = {order} exceeds the polynomial order {m}")]
    OrderTooHigh {
        alpha: MultiIndex,
        order: u32,
        m: u32,
    },
    #[error("multi-index {alpha} has {got} entries, expected {expected}")]
    WrongArity {
        alpha: MultiIndex,
        got: usize,
        expected: usize,
    },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("component index {component} out of range for K = {k}")]
    ComponentOutOfRange { component: usize, k: usize },
    #[error("jet has {got} values, expected {expected}")]
    IncompleteJet { got: usize, expected: usize },
    #[error("cells {first} and {second} have overlapping interiors")]
    Overlap { first: usize, second: usize },
    #[error("tiling leaves a coverage gap at grid point {point:?}")]
    CoverageGap { point: Vec<f64> },
    #[error("cell {cell} lies outside the grid box")]
    OutsideBox { cell: usize },
    #[error("tiling skeleton is not nowhere dense on the grid")]
    SkeletonNotNowhereDense,
    #[error("expected {expected} polynomials per cell, got {got}")]
    PolyCount { expected: usize, got: usize },
    #[error("sampling grid does not match the tiling grid: {0}")]
    GridMismatch(String),
    #[error("invalid piecewise polynomial file: {0}")]
    Format(String),
}

/// System signature: space dimension `n`, component count `k`, order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub n: usize,
    pub k: usize,
    pub m: u32,
}

impl Signature {
    pub fn new(n: usize, k: usize, m: u32) -> Self {
        Self { n, k, m }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !self.dominates(other) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// All multi-indices `|α| <= m` in `n` variables, for `k` components.
///
/// Ordering is by total degree, then descending lexicographic within a
/// degree, so for `n = 2, m = 1` the order is `(0,0), (1,0), (0,1)`.
/// A jet vector of length `M = k * count` is laid out component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndexSet {
    sig: Signature,
    indices: Vec<MultiIndex>,
    // for each β: (position of α, α - β) for every α >= β in the set
    shifts: Vec<Vec<(usize, MultiIndex)>>,
}

impl MultiIndexSet {
    pub fn new(sig: Signature) -> Self {
        let mut indices = Vec::new();
        for d in 0..=sig.m {
            let mut buf = vec![0u32; sig.n];
            compositions(d, 0, &mut buf, &mut indices);
        }
        let shifts = indices
            .iter()
            .map(|beta| {
                indices
                    .iter()
                    .enumerate()
                    .filter_map(|(pos, alpha)| alpha.checked_sub(beta).map(|g| (pos, g)))
                    .collect()
            })
            .collect();
        Self {
            sig,
            indices,
            shifts,
        }
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn n(&self) -> usize {
        self.sig.n
    }

    pub fn k(&self) -> usize {
        self.sig.k
    }

    pub fn m(&self) -> u32 {
        self.sig.m
    }

    /// Number of multi-indices, `C(n + m, m)`.
    pub fn count(&self) -> usize {
        self.indices.len()
    }

    /// Length `M` of a full jet vector.
    pub fn dim(&self) -> usize {
        self.sig.k * self.indices.len()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }

    /// Flat jet slot of `(component, α)`; `component` is 0-based.
    pub fn slot(&self, component: usize, alpha: &MultiIndex) -> Option<usize> {
        if component >= self.sig.k {
            return None;
        }
        self.position(alpha).map(|p| component * self.count() + p)
    }

    /// Inverse of [`slot`](Self::slot).
    pub fn unslot(&self, slot: usize) -> (usize, &MultiIndex) {
        (slot / self.count(), &self.indices[slot % self.count()])
    }

    /// Human-readable label `u[i,(α)]` (1-based component) for a slot.
    pub fn label(&self, slot: usize) -> String {
        let (i, alpha) = self.unslot(slot);
        format!("u[{},{}]", i + 1, alpha)
    }

    pub(crate) fn shifts(&self, beta_pos: usize) -> &[(usize, MultiIndex)] {
        &self.shifts[beta_pos]
    }
}

fn compositions(rest: u32, axis: usize, buf: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let n = buf.len();
    if n == 0 {
        if rest == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if axis == n - 1 {
        buf[axis] = rest;
        out.push(MultiIndex(buf.clone()));
        return;
    }
    for a in (0..=rest).rev() {
        buf[axis] = a;
        compositions(rest - a, axis + 1, buf, out);
    }
    buf[axis] = 0;
}

/// A complete jet `ξ_{iα}` anchored at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    set: Arc<MultiIndexSet>,
    base: Vec<f64>,
    values: Vec<f64>,
}

impl Jet {
    pub fn new(
        set: Arc<MultiIndexSet>,
        base: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, JetError> {
        if base.len() != set.n() {
            return Err(JetError::DimensionMismatch {
                got: base.len(),
                expected: set.n(),
            });
        }
        if values.len() != set.dim() {
            return Err(JetError::IncompleteJet {
                got: values.len(),
                expected: set.dim(),
            });
        }
        Ok(Self { set, base, values })
    }

    pub fn zero(set: Arc<MultiIndexSet>, base: Vec<f64>) -> Self {
        let dim = set.dim();
        Self {
            set,
            base,
            values: vec![0.0; dim],
        }
    }

    pub fn set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ξ_{iα}` with a 0-based component.
    pub fn get(&self, component: usize, alpha: &MultiIndex) -> Option<f64> {
        self.set.slot(component, alpha).map(|s| self.values[s])
    }
}

/// A scalar polynomial of total degree `<= m` in the divided-power basis
/// `(x - anchor)^α / α!`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    set: Arc<MultiIndexSet>,
    anchor: Vec<f64>,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(
        set: Arc<MultiIndexSet>,
        anchor: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self, JetError> {
        if anchor.len() != set.n() {
            return Err(JetError::DimensionMismatch {
                got: anchor.len(),
                expected: set.n(),
            });
        }
        if coeffs.len() != set.count() {
            return Err(JetError::IncompleteJet {
                got: coeffs.len(),
                expected: set.count(),
            });
        }
        Ok(Self {
            set,
            anchor,
            coeffs,
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Coefficients in the divided-power basis, i.e. the derivatives at the
    /// anchor in [`MultiIndexSet`] order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    /// Coefficients in the plain shifted monomial basis `(x - anchor)^α`.
    pub fn monomial_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(self.set.indices())
            .map(|(c, a)| c / a.factorial())
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut table = Vec::new();
        self.power_table(x, &mut table);
        self.deriv_from_table(0, &table)
    }

    /// Writes `D^β P(x)` for every β of the set into `out`.
    pub fn derivs_at(&self, x: &[f64], out: &mut [f64]) {
        let mut table = Vec::new();
        self.power_table(x, &mut table);
        for (pos, o) in out.iter_mut().enumerate().take(self.set.count()) {
            *o = self.deriv_from_table(pos, &table);
        }
    }

    // table[axis * (m + 1) + j] = t_axis^j / j!
    fn power_table(&self, x: &[f64], table: &mut Vec<f64>) {
        let m = self.set.m() as usize;
        table.clear();
        table.resize(self.set.n() * (m + 1), 0.0);
        for axis in 0..self.set.n() {
            let t = x[axis] - self.anchor[axis];
            let row = &mut table[axis * (m + 1)..(axis + 1) * (m + 1)];
            row[0] = 1.0;
            for j in 1..=m {
                row[j] = row[j - 1] * t / j as f64;
            }
        }
    }

    fn deriv_from_table(&self, beta_pos: usize, table: &[f64]) -> f64 {
        let stride = self.set.m() as usize + 1;
        let mut acc = 0.0;
        for (pos, gamma) in self.set.shifts(beta_pos) {
            let mut term = self.coeffs[*pos];
            for (axis, &g) in gamma.0.iter().enumerate() {
                term *= table[axis * stride + g as usize];
            }
            acc += term;
        }
        acc
    }
}

/// The `K` Taylor polynomials `P_i(x) = Σ ξ_{iα} (x - x0)^α / α!` of a jet.
pub fn taylor_poly(jet: &Jet) -> Vec<Polynomial> {
    let count = jet.set.count();
    jet.values
        .chunks(count)
        .map(|c| Polynomial {
            set: jet.set.clone(),
            anchor: jet.base.clone(),
            coeffs: c.to_vec(),
        })
        .collect()
}

/// `D^α P(x)`, exact polynomial differentiation then evaluation.
pub fn deriv_eval(p: &Polynomial, alpha: &MultiIndex, x: &[f64]) -> Result<f64, JetError> {
    if alpha.len() != p.set.n() {
        return Err(JetError::WrongArity {
            alpha: alpha.clone(),
            got: alpha.len(),
            expected: p.set.n(),
        });
    }
    if x.len() != p.set.n() {
        return Err(JetError::DimensionMismatch {
            got: x.len(),
            expected: p.set.n(),
        });
    }
    let pos = p
        .set
        .position(alpha)
        .ok_or_else(|| JetError::OrderTooHigh {
            alpha: alpha.clone(),
            order: alpha.order(),
            m: p.set.m(),
        })?;
    let mut table = Vec::new();
    p.power_table(x, &mut table);
    Ok(p.deriv_from_table(pos, &table))
}
