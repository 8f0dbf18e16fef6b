//! Discrete calculus of normal lower semi-continuous functions.
//!
//! A [`GridFunction`] is read as a function that is continuous on the open
//! set of unmarked grid points and may jump only across the marked
//! skeleton. Under that reading the lower and upper Baire operators leave
//! unmarked values alone (the shrinking balls eventually see only one
//! continuous piece), and at a skeleton point they take the min / max of
//! the point value and the one-sided limits, which are represented by the
//! nearest unmarked stencil neighbours. Their composition `I∘S` therefore
//! assigns every skeleton point the minimum of its adjacent limits and is
//! exactly idempotent.

mod csv_io;
mod grid;
mod order;

use std::sync::Arc;

use thiserror::Error;

pub use csv_io::{read_csv, write_csv};
pub use grid::GridDomain;
pub use order::{
    lipschitz_envelopes, order_convergence_check, quasi_uniform_check, OrderCertificate,
    OrderViolation, QuasiUniformReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlscError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid functions live on different domains")]
    DomainMismatch,
    #[error("value count {got} does not match grid size {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("non-finite value {value} at unmarked grid point {point}")]
    NonFiniteOffSkeleton { point: usize, value: f64 },
    #[error("NaN at grid point {point}")]
    NaN { point: usize },
    #[error("order interval has lower > upper at grid point {point}")]
    InvertedInterval { point: usize },
    #[error("sequence lengths differ: {0}")]
    SequenceLength(String),
    #[error("sequence is not monotone at index {index}, grid point {point}")]
    NotMonotone { index: usize, point: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("csv: {0}")]
    Csv(String),
}

/// Extended-real samples on a [`GridDomain`].
///
/// `±∞` is admitted only at skeleton points; unmarked values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
    normalized: bool,
}

impl GridFunction {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self, NlscError> {
        if values.len() != domain.len() {
            return Err(NlscError::LengthMismatch {
                got: values.len(),
                expected: domain.len(),
            });
        }
        for (p, &v) in values.iter().enumerate() {
            if v.is_nan() {
                return Err(NlscError::NaN { point: p });
            }
            if !v.is_finite() && !domain.is_skeleton(p) {
                return Err(NlscError::NonFiniteOffSkeleton { point: p, value: v });
            }
        }
        Ok(Self {
            domain,
            values,
            normalized: false,
        })
    }

    pub fn from_fn(
        domain: Arc<GridDomain>,
        mut f: impl FnMut(&[f64]) -> f64,
    ) -> Result<Self, NlscError> {
        let values = (0..domain.len()).map(|p| f(&domain.point(p))).collect();
        Self::new(domain, values)
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Result<Self, NlscError> {
        let len = domain.len();
        Self::new(domain, vec![c; len])
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, p: usize) -> f64 {
        self.values[p]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flag set by [`normalize`]; such functions satisfy `normalize(u) == u`.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Recomputes the normal-lsc property instead of trusting the flag.
    pub fn check_normalized(&self) -> bool {
        normalize(self).values == self.values
    }

    /// The same values re-read on another domain with identical geometry;
    /// skeleton values are re-normalized there.
    pub fn on_domain(&self, domain: Arc<GridDomain>) -> Result<GridFunction, NlscError> {
        if !self.domain.same_geometry(&domain) {
            return Err(NlscError::DomainMismatch);
        }
        let values = (0..domain.len())
            .map(|p| {
                if domain.is_skeleton(p) {
                    0.0
                } else {
                    self.values[p]
                }
            })
            .collect();
        Ok(normalize(&GridFunction::new(domain, values)?))
    }

    /// Values at unmarked points.
    pub fn off_skeleton(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(p, _)| !self.domain.is_skeleton(*p))
            .map(|(p, v)| (p, *v))
    }

    /// Sup norm over unmarked points.
    pub fn sup_norm(&self) -> f64 {
        self.off_skeleton()
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridFunction, NlscError> {
        GridFunction::new(
            self.domain.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction, NlscError> {
        same_domain(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        GridFunction::new(self.domain.clone(), values)
    }
}

pub(crate) fn same_domain(u: &GridFunction, v: &GridFunction) -> Result<(), NlscError> {
    if Arc::ptr_eq(&u.domain, &v.domain) || *u.domain == *v.domain {
        Ok(())
    } else {
        Err(NlscError::DomainMismatch)
    }
}

fn regularize(u: &GridFunction, pick: fn(f64, f64) -> f64) -> GridFunction {
    let d = &u.domain;
    let values = (0..d.len())
        .map(|p| {
            if !d.is_skeleton(p) {
                return u.values[p];
            }
            d.neighbors(p)
                .into_iter()
                .filter(|&q| !d.is_skeleton(q))
                .fold(u.values[p], |acc, q| pick(acc, u.values[q]))
        })
        .collect();
    GridFunction {
        domain: d.clone(),
        values,
        normalized: false,
    }
}

/// Lower Baire operator `I`.
pub fn baire_lower(u: &GridFunction) -> GridFunction {
    regularize(u, f64::min)
}

/// Upper Baire operator `S`.
pub fn baire_upper(u: &GridFunction) -> GridFunction {
    regularize(u, f64::max)
}

/// `I∘S`: the normal lower semi-continuous regularization.
pub fn normalize(u: &GridFunction) -> GridFunction {
    let mut out = baire_lower(&baire_upper(u));
    out.normalized = true;
    out
}

/// Lattice supremum: `normalize(max(u, v))`.
pub fn lattice_sup(u: &GridFunction, v: &GridFunction) -> Result<GridFunction, NlscError> {
    Ok(normalize(&u.zip_with(v, f64::max)?))
}

/// Lattice infimum: `normalize(min(u, v))`.
pub fn lattice_inf(u: &GridFunction, v: &GridFunction) -> Result<GridFunction, NlscError> {
    Ok(normalize(&u.zip_with(v, f64::min)?))
}

/// `u <= v` on the dense set of unmarked points.
pub fn leq_dense(u: &GridFunction, v: &GridFunction) -> Result<bool, NlscError> {
    same_domain(u, v)?;
    Ok(first_violation(u, v).is_none())
}

pub(crate) fn first_violation(u: &GridFunction, v: &GridFunction) -> Option<usize> {
    u.off_skeleton()
        .find(|&(p, a)| a > v.values[p])
        .map(|(p, _)| p)
}

/// An order interval `[lower, upper]` of grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderInterval {
    lower: GridFunction,
    upper: GridFunction,
}

impl OrderInterval {
    pub fn new(lower: GridFunction, upper: GridFunction) -> Result<Self, NlscError> {
        same_domain(&lower, &upper)?;
        if let Some(point) = first_violation(&lower, &upper) {
            return Err(NlscError::InvertedInterval { point });
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &GridFunction {
        &self.lower
    }

    pub fn upper(&self) -> &GridFunction {
        &self.upper
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        self.lower.domain()
    }

    /// `upper - lower` at every point (skeleton included).
    pub fn width(&self) -> Vec<f64> {
        self.lower
            .values
            .iter()
            .zip(&self.upper.values)
            .map(|(l, u)| u - l)
            .collect()
    }

    /// Off-skeleton containment `other ⊆ self`.
    pub fn contains(&self, other: &OrderInterval) -> bool {
        first_violation(&self.lower, &other.lower).is_none()
            && first_violation(&other.upper, &self.upper).is_none()
    }

    pub fn contains_function(&self, u: &GridFunction) -> bool {
        first_violation(&self.lower, u).is_none() && first_violation(u, &self.upper).is_none()
    }
}
