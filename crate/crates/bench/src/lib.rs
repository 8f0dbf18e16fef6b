//! Shared fixtures for the benchmarks in `benches/`.

use ordercomplete::{ExactSolution, GridDomain, PdeSystem, Signature};

/// `u' + u^3 = cos x + sin^3 x` on `[0, 3]`, exact solution `sin`.
pub fn manufactured() -> (PdeSystem, ExactSolution) {
    let sys = PdeSystem::new(
        Signature::new(1, 1, 1),
        &["u[1,(1)] + u[1,(0)]^3"],
        &["cos(x1) + sin(x1)^3"],
        vec![0.0],
        vec![3.0],
    )
    .expect("valid system");
    let exact = ExactSolution::new(sys.set().clone(), &["sin(x1)"]).expect("valid exact solution");
    (sys, exact)
}

/// `u_xx + u_yy - u = 0` on the unit square.
pub fn helmholtz_2d() -> PdeSystem {
    PdeSystem::new(
        Signature::new(2, 1, 2),
        &["u[1,(2,0)] + u[1,(0,2)] - u[1,(0,0)]"],
        &["0"],
        vec![0.0, 0.0],
        vec![1.0, 1.0],
    )
    .expect("valid system")
}

pub fn grid(sys: &PdeSystem, res: usize) -> GridDomain {
    GridDomain::uniform(sys.lo().to_vec(), sys.hi().to_vec(), res).expect("valid grid")
}
