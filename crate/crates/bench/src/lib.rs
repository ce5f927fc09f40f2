//! Shared fixtures for the pipeline benchmarks.

use std::sync::Arc;

use gpcert::gpe::{scf_solve, GpeProblem, GroundState, ScfOptions};
use gpcert::mesh::{unit_square_mesh, TriangleMesh};
use gpcert::DomainPreset;

pub fn bench_mesh(n: usize) -> Arc<TriangleMesh> {
    Arc::new(unit_square_mesh(n).expect("n >= 1"))
}

pub fn bench_problem() -> GpeProblem {
    GpeProblem::new(DomainPreset::UnitSquare, [1.0, 1.0], 1.0).expect("valid preset")
}

pub fn bench_scf_options() -> ScfOptions {
    ScfOptions {
        tol: 1e-9,
        max_iter: 200,
        damping: 0.7,
    }
}

pub fn solved_state(n: usize) -> GroundState {
    scf_solve(&bench_problem(), &bench_mesh(n), &bench_scf_options())
        .expect("benchmark preset converges")
}
