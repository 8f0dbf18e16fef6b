use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{deriv_eval, JetError, MultiIndex, MultiIndexSet, Polynomial, Signature};
use crate::nlsc::{normalize, GridDomain, GridFunction};

/// A closed box whose corners are grid points.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl Cell {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        debug_assert!(lo.len() == hi.len() && lo.iter().zip(&hi).all(|(a, b)| a < b));
        Self { lo, hi }
    }

    /// The whole grid as one cell.
    pub fn whole(grid: &GridDomain) -> Self {
        Self::new(
            vec![0; grid.dim()],
            grid.resolution().iter().map(|r| r - 1).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Width in grid spacings along `axis`.
    pub fn width(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter()
            .enumerate()
            .all(|(a, &i)| self.lo[a] <= i && i <= self.hi[a])
    }

    pub fn contains_interior(&self, idx: &[usize]) -> bool {
        idx.iter()
            .enumerate()
            .all(|(a, &i)| self.lo[a] < i && i < self.hi[a])
    }

    pub fn lo_coords(&self, grid: &GridDomain) -> Vec<f64> {
        self.lo
            .iter()
            .enumerate()
            .map(|(a, &i)| grid.coord(a, i))
            .collect()
    }

    pub fn hi_coords(&self, grid: &GridDomain) -> Vec<f64> {
        self.hi
            .iter()
            .enumerate()
            .map(|(a, &i)| grid.coord(a, i))
            .collect()
    }

    /// Geometric centre.
    pub fn center(&self, grid: &GridDomain) -> Vec<f64> {
        let (lo, hi) = (self.lo_coords(grid), self.hi_coords(grid));
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Flat indices of the grid points strictly inside the cell.
    pub fn interior_points(&self, grid: &GridDomain) -> Vec<usize> {
        let lo: Vec<usize> = self.lo.iter().map(|i| i + 1).collect();
        let hi: Vec<usize> = self.hi.iter().map(|i| i - 1).collect();
        box_points(grid, &lo, &hi)
    }

    /// Flat indices of every grid point of the closed cell.
    pub fn closed_points(&self, grid: &GridDomain) -> Vec<usize> {
        box_points(grid, &self.lo, &self.hi)
    }

    /// Splits along every axis at the integer midpoints of `parts` pieces.
    /// Axes narrower than `parts` spacings are split as far as possible.
    pub fn split(&self, parts: usize) -> Vec<Cell> {
        let mut out = vec![Cell::new(Vec::new(), Vec::new())];
        for axis in 0..self.dim() {
            let w = self.width(axis);
            let k = parts.min(w).max(1);
            let cuts: Vec<usize> = (0..=k).map(|j| self.lo[axis] + j * w / k).collect();
            let mut next = Vec::with_capacity(out.len() * k);
            for c in &out {
                for j in 0..k {
                    let mut lo = c.lo.clone();
                    let mut hi = c.hi.clone();
                    lo.push(cuts[j]);
                    hi.push(cuts[j + 1]);
                    next.push(Cell { lo, hi });
                }
            }
            out = next;
        }
        out
    }
}

/// Inclusive index box, possibly empty.
fn box_points(grid: &GridDomain, lo: &[usize], hi: &[usize]) -> Vec<usize> {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Vec::new();
    }
    let n = lo.len();
    let mut out = Vec::new();
    let mut idx = lo.to_vec();
    loop {
        out.push(grid.flat(&idx));
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if idx[axis] < hi[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo[axis];
        }
    }
}

/// `K` polynomials per cell over a tiling of the grid box. Grid points on
/// any cell boundary form the skeleton of [`PiecewisePoly::domain`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    domain: Arc<GridDomain>,
    set: Arc<MultiIndexSet>,
    cells: Vec<Cell>,
    polys: Vec<Vec<Polynomial>>,
    owner: Vec<Option<usize>>,
}

/// Assembles a piecewise polynomial; `grid` supplies the geometry (its own
/// skeleton is ignored).
pub fn assemble(
    cells: Vec<Cell>,
    polys: Vec<Vec<Polynomial>>,
    grid: &GridDomain,
) -> Result<PiecewisePoly, JetError> {
    if polys.len() != cells.len() {
        return Err(JetError::PolyCount {
            expected: cells.len(),
            got: polys.len(),
        });
    }
    let set = polys
        .first()
        .and_then(|p| p.first())
        .map(|p| p.set().clone())
        .ok_or(JetError::PolyCount {
            expected: 1,
            got: 0,
        })?;
    let k = set.k();
    for p in &polys {
        if p.len() != k {
            return Err(JetError::PolyCount {
                expected: k,
                got: p.len(),
            });
        }
        if p.iter().any(|q| q.set().signature() != set.signature()) {
            return Err(JetError::Format(
                "polynomials disagree on the signature".into(),
            ));
        }
    }
    let n = grid.dim();
    if set.n() != n {
        return Err(JetError::DimensionMismatch {
            got: set.n(),
            expected: n,
        });
    }
    let res = grid.resolution();
    for (c, cell) in cells.iter().enumerate() {
        let bad_shape = cell.dim() != n || cell.lo.iter().zip(&cell.hi).any(|(a, b)| a >= b);
        if bad_shape || cell.hi.iter().zip(res).any(|(h, r)| *h >= *r) {
            return Err(JetError::OutsideBox { cell: c });
        }
    }

    // Each unit cube of the index lattice must belong to exactly one cell.
    let cube_res: Vec<usize> = res.iter().map(|r| r - 1).collect();
    let cube_flat = |idx: &[usize]| idx.iter().zip(&cube_res).fold(0, |acc, (i, r)| acc * r + i);
    let mut cube_owner: Vec<Option<usize>> = vec![None; cube_res.iter().product()];
    for (c, cell) in cells.iter().enumerate() {
        let mut idx = cell.lo.clone();
        'cubes: loop {
            let f = cube_flat(&idx);
            if let Some(first) = cube_owner[f] {
                return Err(JetError::Overlap { first, second: c });
            }
            cube_owner[f] = Some(c);
            let mut axis = n;
            loop {
                if axis == 0 {
                    break 'cubes;
                }
                axis -= 1;
                if idx[axis] + 1 < cell.hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = cell.lo[axis];
            }
        }
    }
    if let Some(f) = cube_owner.iter().position(Option::is_none) {
        let mut rem = f;
        let mut idx = vec![0; n];
        for axis in (0..n).rev() {
            idx[axis] = rem % cube_res[axis];
            rem /= cube_res[axis];
        }
        let point = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| grid.coord(a, i))
            .collect();
        return Err(JetError::CoverageGap { point });
    }

    let mut owner = vec![None; grid.len()];
    let mut skeleton = vec![false; grid.len()];
    for (c, cell) in cells.iter().enumerate() {
        for p in cell.closed_points(grid) {
            if cell.contains_interior(&grid.multi_index(p)) {
                owner[p] = Some(c);
            } else {
                skeleton[p] = true;
            }
        }
    }
    let domain = grid
        .unmarked()
        .with_skeleton(skeleton)
        .map_err(|e| JetError::GridMismatch(e.to_string()))?;
    if !domain.is_nowhere_dense() {
        return Err(JetError::SkeletonNotNowhereDense);
    }
    Ok(PiecewisePoly {
        domain: Arc::new(domain),
        set,
        cells,
        polys,
        owner,
    })
}

impl PiecewisePoly {
    /// Grid whose skeleton is the union of the cell boundaries.
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn set(&self) -> &Arc<MultiIndexSet> {
        &self.set
    }

    pub fn signature(&self) -> Signature {
        self.set.signature()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn polys(&self, cell: usize) -> &[Polynomial] {
        &self.polys[cell]
    }

    /// The cell whose interior contains grid point `p`.
    pub fn owner(&self, p: usize) -> Option<usize> {
        self.owner[p]
    }

    /// The full jet of all components at an unmarked grid point, in slot
    /// order. Returns `false` at skeleton points.
    pub fn jet_at(&self, p: usize, out: &mut [f64]) -> bool {
        let Some(c) = self.owner[p] else { return false };
        let x = self.domain.point(p);
        let count = self.set.count();
        for (i, poly) in self.polys[c].iter().enumerate() {
            poly.derivs_at(&x, &mut out[i * count..(i + 1) * count]);
        }
        true
    }

    pub fn to_file(&self) -> PiecewisePolyFile {
        PiecewisePolyFile {
            signature: self.signature(),
            lo: self.domain.lo().to_vec(),
            hi: self.domain.hi().to_vec(),
            resolution: self.domain.resolution().to_vec(),
            cells: self
                .cells
                .iter()
                .zip(&self.polys)
                .map(|(cell, ps)| CellRecord {
                    lo_index: cell.lo.clone(),
                    hi_index: cell.hi.clone(),
                    lo: cell.lo_coords(&self.domain),
                    hi: cell.hi_coords(&self.domain),
                    polys: ps
                        .iter()
                        .map(|p| PolyRecord {
                            anchor: p.anchor().to_vec(),
                            coeffs: p.coeffs().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &PiecewisePolyFile) -> Result<Self, JetError> {
        let grid = GridDomain::new(file.lo.clone(), file.hi.clone(), file.resolution.clone())
            .map_err(|e| JetError::Format(e.to_string()))?;
        let set = Arc::new(MultiIndexSet::new(file.signature));
        let mut cells = Vec::with_capacity(file.cells.len());
        let mut polys = Vec::with_capacity(file.cells.len());
        for rec in &file.cells {
            cells.push(Cell {
                lo: rec.lo_index.clone(),
                hi: rec.hi_index.clone(),
            });
            let ps = rec
                .polys
                .iter()
                .map(|p| Polynomial::new(set.clone(), p.anchor.clone(), p.coeffs.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            polys.push(ps);
        }
        assemble(cells, polys, &grid)
    }
}

/// Serialized [`PiecewisePoly`]. Coefficients are the derivatives at the
/// anchor, ordered as in [`MultiIndexSet::indices`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolyFile {
    pub signature: Signature,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: Vec<usize>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub lo_index: Vec<usize>,
    pub hi_index: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub polys: Vec<PolyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyRecord {
    pub anchor: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// `(I∘S)(D^α V_i)` sampled on `grid`.
///
/// `grid` must share the geometry of `v` and mark at least its cell
/// boundaries; extra marks are allowed, e.g. the union skeleton of several
/// tilings. The result is normalized.
pub fn sample_component(
    v: &PiecewisePoly,
    component: usize,
    alpha: &MultiIndex,
    grid: &Arc<GridDomain>,
) -> Result<GridFunction, JetError> {
    if component >= v.set.k() {
        return Err(JetError::ComponentOutOfRange {
            component,
            k: v.set.k(),
        });
    }
    if !v.domain.same_geometry(grid) {
        return Err(JetError::GridMismatch("different box or resolution".into()));
    }
    if !v.domain.skeleton_subset_of(grid) {
        return Err(JetError::GridMismatch(
            "grid does not mark every cell boundary".into(),
        ));
    }
    let mut values = vec![0.0; grid.len()];
    for (p, val) in values.iter_mut().enumerate() {
        if grid.is_skeleton(p) {
            continue;
        }
        let c = v.owner[p].expect("unmarked points have an owning cell");
        *val = deriv_eval(&v.polys[c][component], alpha, &grid.point(p))?;
    }
    let raw = GridFunction::new(grid.clone(), values)
        .map_err(|e| JetError::GridMismatch(e.to_string()))?;
    Ok(normalize(&raw))
}
