use serde::{Deserialize, Serialize};

use super::NlscError;

/// A rectangular grid on a box in `R^n` with a marked skeleton.
///
/// Points are laid out row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    res: Vec<usize>,
    skeleton: Vec<bool>,
}

impl GridDomain {
    /// Grid with an empty skeleton.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, res: Vec<usize>) -> Result<Self, NlscError> {
        let n = lo.len();
        if n == 0 || hi.len() != n || res.len() != n {
            return Err(NlscError::InvalidGrid(
                "bounds and resolution must have equal, nonzero length".into(),
            ));
        }
        for axis in 0..n {
            if !(lo[axis].is_finite() && hi[axis].is_finite() && lo[axis] < hi[axis]) {
                return Err(NlscError::InvalidGrid(format!(
                    "axis {axis}: need finite lo < hi"
                )));
            }
            if res[axis] < 3 {
                return Err(NlscError::InvalidGrid(format!(
                    "axis {axis}: resolution {} < 3",
                    res[axis]
                )));
            }
        }
        let len = res.iter().product();
        Ok(Self {
            lo,
            hi,
            res,
            skeleton: vec![false; len],
        })
    }

    /// Same grid, uniform resolution on every axis.
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, res: usize) -> Result<Self, NlscError> {
        let n = lo.len();
        Self::new(lo, hi, vec![res; n])
    }

    pub fn with_skeleton(mut self, skeleton: Vec<bool>) -> Result<Self, NlscError> {
        if skeleton.len() != self.len() {
            return Err(NlscError::InvalidGrid(format!(
                "skeleton has {} flags for {} points",
                skeleton.len(),
                self.len()
            )));
        }
        self.skeleton = skeleton;
        Ok(self)
    }

    /// Copy of this grid with the skeleton replaced by the given predicate.
    pub fn with_skeleton_fn(&self, mut marked: impl FnMut(&[f64]) -> bool) -> Self {
        let skeleton = (0..self.len()).map(|p| marked(&self.point(p))).collect();
        Self {
            skeleton,
            ..self.clone()
        }
    }

    /// The same geometry with no marked points.
    pub fn unmarked(&self) -> Self {
        Self {
            skeleton: vec![false; self.len()],
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.skeleton.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skeleton.is_empty()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn resolution(&self) -> &[usize] {
        &self.res
    }

    pub fn skeleton(&self) -> &[bool] {
        &self.skeleton
    }

    pub fn is_skeleton(&self, p: usize) -> bool {
        self.skeleton[p]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.res[axis] - 1) as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinate of grid line `i` along `axis`. Cell bounds built from
    /// this function coincide bit-for-bit with grid point coordinates.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.res[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.spacing(axis)
        }
    }

    /// Nearest grid line index to `x` along `axis`, clamped to the grid.
    pub fn nearest_index(&self, axis: usize, x: f64) -> usize {
        let t = ((x - self.lo[axis]) / self.spacing(axis)).round();
        t.clamp(0.0, (self.res[axis] - 1) as f64) as usize
    }

    pub fn multi_index(&self, mut p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = p % self.res[axis];
            p /= self.res[axis];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.res).fold(0, |acc, (i, r)| acc * r + i)
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        self.multi_index(p)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.coord(axis, i))
            .collect()
    }

    /// Same box and resolution (skeleton may differ).
    pub fn same_geometry(&self, other: &GridDomain) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.res == other.res
    }

    /// Flat indices of the closed unit stencil around `p`, excluding `p`.
    pub fn neighbors(&self, p: usize) -> Vec<usize> {
        let idx = self.multi_index(p);
        let n = self.dim();
        let mut out = Vec::with_capacity(3usize.pow(n as u32) - 1);
        let mut offset = vec![-1i64; n];
        loop {
            if offset.iter().any(|&o| o != 0) {
                let mut ok = true;
                let mut q = 0usize;
                for axis in 0..n {
                    let j = idx[axis] as i64 + offset[axis];
                    if j < 0 || j >= self.res[axis] as i64 {
                        ok = false;
                        break;
                    }
                    q = q * self.res[axis] + j as usize;
                }
                if ok {
                    out.push(q);
                }
            }
            // odometer over {-1, 0, 1}^n
            let mut axis = n;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if offset[axis] < 1 {
                    offset[axis] += 1;
                    break;
                }
                offset[axis] = -1;
            }
        }
    }

    /// Discrete nowhere-density: every `2 x ... x 2` block of interior
    /// grid points contains an unmarked point.
    pub fn is_nowhere_dense(&self) -> bool {
        self.nowhere_dense_violation(&self.skeleton).is_none()
    }

    /// First fully marked interior block (its lowest corner), if any.
    pub fn nowhere_dense_violation(&self, marked: &[bool]) -> Option<Vec<usize>> {
        let n = self.dim();
        if self.res.iter().any(|&r| r < 4) {
            // fewer than two interior lines on some axis: no block exists
            return None;
        }
        let mut base = vec![1usize; n];
        loop {
            let mut all_marked = true;
            for corner in 0..(1usize << n) {
                let idx: Vec<usize> = (0..n).map(|a| base[a] + ((corner >> a) & 1)).collect();
                if !marked[self.flat(&idx)] {
                    all_marked = false;
                    break;
                }
            }
            if all_marked {
                return Some(base);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return None;
                }
                axis -= 1;
                if base[axis] + 3 < self.res[axis] {
                    base[axis] += 1;
                    break;
                }
                base[axis] = 1;
            }
        }
    }

    /// Same geometry with the union of both skeletons.
    pub fn union_skeleton(&self, other: &GridDomain) -> Result<GridDomain, NlscError> {
        if !self.same_geometry(other) {
            return Err(NlscError::DomainMismatch);
        }
        let skeleton = self
            .skeleton
            .iter()
            .zip(&other.skeleton)
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(Self {
            skeleton,
            ..self.clone()
        })
    }

    /// True when every point marked in `self` is also marked in `other`.
    pub fn skeleton_subset_of(&self, other: &GridDomain) -> bool {
        self.skeleton
            .iter()
            .zip(&other.skeleton)
            .all(|(a, b)| !*a || *b)
    }
}
