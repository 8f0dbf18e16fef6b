use std::sync::Arc;

use serde::Serialize;

use super::SolverError;
use crate::jets::Cell;
use crate::nlsc::GridDomain;

/// Smallest cell width in grid spacings: a cell must keep at least one
/// grid point strictly inside, or nothing about it can be checked.
pub const MIN_CELL_WIDTH: usize = 2;

/// Box cover `C_ν` (a single cell here) subdivided into cells `I_{ν,j}`
/// of diameter at most `δ`, with their centres as anchors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tiling {
    #[serde(skip)]
    grid: Arc<GridDomain>,
    pub level0: Vec<Cell>,
    pub cells: Vec<Cell>,
    pub anchors: Vec<Vec<f64>>,
    pub delta: f64,
}

impl Tiling {
    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// `diam / 16`, raised where needed so that [`tile_domain`] can reach it.
pub fn default_delta(grid: &GridDomain) -> f64 {
    let hmax = (0..grid.dim()).map(|a| grid.spacing(a)).fold(0.0, f64::max);
    let floor = (2 * MIN_CELL_WIDTH - 1) as f64 * hmax * (grid.dim() as f64).sqrt();
    (grid.diameter() / 16.0).max(floor)
}

pub(crate) fn cell_diameter(grid: &GridDomain, c: &Cell) -> f64 {
    let (lo, hi) = (c.lo_coords(grid), c.hi_coords(grid));
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

/// Splits every axis that can be split into up to `arity` pieces of at
/// least [`MIN_CELL_WIDTH`] spacings; `None` when no axis can.
pub fn split_with_floor(cell: &Cell, arity: usize) -> Option<Vec<Cell>> {
    let mut out = vec![Cell {
        lo: Vec::new(),
        hi: Vec::new(),
    }];
    let mut any = false;
    for axis in 0..cell.dim() {
        let w = cell.width(axis);
        let k = arity.min(w / MIN_CELL_WIDTH).max(1);
        any |= k > 1;
        let cuts: Vec<usize> = (0..=k).map(|j| cell.lo[axis] + j * w / k).collect();
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..k).map({
                    let cuts = cuts.clone();
                    move |j| {
                        let mut next = c.clone();
                        next.lo.push(cuts[j]);
                        next.hi.push(cuts[j + 1]);
                        next
                    }
                })
            })
            .collect();
    }
    any.then_some(out)
}

/// Repeated `arity`-splitting of the grid box until every cell has
/// diameter `<= δ`.
pub fn tile_domain(grid: &GridDomain, delta: f64, arity: usize) -> Result<Tiling, SolverError> {
    if !(delta > 0.0) || arity < 2 {
        return Err(SolverError::InvalidArgument(format!(
            "need δ > 0 and arity >= 2, got {delta}, {arity}"
        )));
    }
    let grid = Arc::new(grid.unmarked());
    let whole = Cell::whole(&grid);
    let slack = delta * (1.0 + 1e-12);
    let mut done = Vec::new();
    let mut todo = vec![whole.clone()];
    while let Some(c) = todo.pop() {
        if cell_diameter(&grid, &c) <= slack {
            done.push(c);
            continue;
        }
        match split_with_floor(&c, arity) {
            Some(parts) => todo.extend(parts.into_iter().rev()),
            None => {
                return Err(SolverError::InvalidArgument(format!(
                    "δ = {delta} is below what the grid can resolve (cell of {} spacings)",
                    MIN_CELL_WIDTH
                )))
            }
        }
    }
    done.sort_by(|a, b| a.lo.cmp(&b.lo));
    let anchors = done.iter().map(|c| c.center(&grid)).collect();
    Ok(Tiling {
        grid,
        level0: vec![whole],
        cells: done,
        anchors,
        delta,
    })
}
