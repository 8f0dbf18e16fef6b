use serde::Serialize;

use super::AnalysisError;
use crate::nlsc::GridDomain;
use crate::pde::{ExactSolution, PdeError};
use crate::solver::{RefinementStage, SchemeResult};

/// Distances from sampled `D^α u*` to the stage bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceReport {
    /// Slot labels such as `u1_(1)`.
    pub labels: Vec<String>,
    /// `distances[n - 1][slot]`: max over unmarked points of the distance
    /// from `D^α u*_i(x)` to `[λ_n(x), μ_n(x)]`.
    pub distances: Vec<Vec<f64>>,
    pub contained: bool,
}

fn dist(v: f64, l: f64, u: f64) -> f64 {
    if v < l {
        l - v
    } else if v > u {
        v - u
    } else {
        0.0
    }
}

/// Per slot, the largest distance from the reference jet to the band of
/// `stage` over the unmarked points of `grid`.
pub fn stage_distances(
    stage: &RefinementStage,
    u_star: &ExactSolution,
    grid: &GridDomain,
) -> Result<Vec<f64>, AnalysisError> {
    let owner = crate::solver::i_cell_owner(&stage.i_cells, grid)?;
    let m = stage.lower.first().map_or(0, Vec::len);
    let mut out = vec![0.0f64; m];
    for p in (0..grid.len()).filter(|&p| !grid.is_skeleton(p)) {
        let i = owner[p].expect("unmarked points lie inside an I-cell");
        let jet = u_star
            .jet_values(&grid.point(p))
            .map_err(|source| PdeError::Expr {
                key: "exact".into(),
                source,
            })?;
        for (s, v) in jet.into_iter().enumerate().take(m) {
            out[s] = out[s].max(dist(v, stage.lower[i][s], stage.upper[i][s]));
        }
    }
    Ok(out)
}

/// [`stage_distances`] for every stage on the run's common grid; zero
/// everywhere means `u*` is trapped in every band.
pub fn compare_reference(
    result: &SchemeResult,
    u_star: &ExactSolution,
) -> Result<ReferenceReport, AnalysisError> {
    let distances = result
        .stages
        .iter()
        .map(|s| stage_distances(s, u_star, &result.grid))
        .collect::<Result<Vec<_>, _>>()?;
    let set = result.stages[0].v.set();
    let labels = (0..set.dim()).map(|s| set.label(s)).collect();
    let contained = distances.iter().flatten().all(|&d| d == 0.0);
    Ok(ReferenceReport {
        labels,
        distances,
        contained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::Signature;
    use crate::pde::PdeSystem;
    use crate::solver::{run_scheme, SchemeOptions};

    #[test]
    fn affine_reference_per_stage() {
        let sys = PdeSystem::new(
            Signature::new(1, 1, 1),
            &["u[1,(1)]"],
            &["1"],
            vec![0.0],
            vec![1.0],
        )
        .unwrap();
        let g = GridDomain::uniform(vec![0.0], vec![1.0], 33).unwrap();
        let opts = SchemeOptions {
            gamma: 0.4,
            stages: 3,
            delta: Some(2.0),
            ..Default::default()
        };
        let r = run_scheme(&sys, &g, &opts, None).unwrap();
        for s in &r.stages {
            let slope = 1.0 - 0.4 / (2.0 * s.n as f64);
            // V_n itself: the anchor jet sits at the cell centre with ξ0 = 0
            let u =
                ExactSolution::new(sys.set().clone(), &[&format!("{slope} * (x1 - 0.5)")]).unwrap();
            assert!(stage_distances(s, &u, &r.grid)
                .unwrap()
                .iter()
                .all(|&d| d == 0.0));
        }
        // far off the bands
        let wrong = ExactSolution::new(sys.set().clone(), &["10 * x1 + 5"]).unwrap();
        let rep = compare_reference(&r, &wrong).unwrap();
        assert!(!rep.contained && rep.distances.iter().all(|d| d[0] > 0.0 && d[1] > 0.0));
        assert_eq!(rep.labels.len(), 2);
    }
}
