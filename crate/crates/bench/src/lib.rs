//! Fixtures shared by the solver benchmarks.

use dpm_core::ap::{ApBackend, ApClosure, ApSolver};
use dpm_core::grid::AuxiliaryGrid;
use dpm_core::operators::{DiscreteOperator, EdgeClosure, StencilKind};

/// Heat-step operator on `[-2, 2]^2` with `n` nodes per axis and `dt = h / 2`.
pub fn heat_operator(n: usize, kind: StencilKind, closure: EdgeClosure) -> DiscreteOperator {
    let grid = AuxiliaryGrid::new((-2.0, 2.0), (-2.0, 2.0), n).expect("grid");
    let sigma = 1.0 / (0.5 * grid.h);
    DiscreteOperator::new(grid, kind, closure, 1.0, sigma).expect("operator")
}

pub fn ap_solver(n: usize, kind: StencilKind, closure: EdgeClosure, backend: ApBackend) -> ApSolver {
    ApSolver::new(heat_operator(n, kind, closure), backend, ApClosure::Zero).expect("auxiliary solver")
}

/// Smooth right-hand side sampled on the lattice.
pub fn smooth_rhs(op: &DiscreteOperator) -> Vec<f64> {
    (0..op.grid.len())
        .map(|k| {
            let p = op.grid.point_of(k);
            (1.3 * p.x).sin() * (0.7 * p.y).cos()
        })
        .collect()
}
