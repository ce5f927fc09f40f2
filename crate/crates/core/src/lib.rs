//! Ground-state solver for the Gross-Pitaevskii equation in two dimensions
//! with a computable a posteriori error certificate.
//!
//! The crate solves the nonlinear eigenvalue problem
//!
//! ```text
//! -Δu + W u + ζ|u|²u = λ u   in Ω,    u = 0 on ∂Ω,    ∫|u|² = 1,
//! ```
//!
//! with a harmonic trap `W(x) = γ₁x₁² + γ₂x₂²` on the unit square or an
//! L-shaped domain, discretized by conforming P1 elements. On top of the
//! discrete eigenpair `(λ_h, u_h)` it reconstructs an H(div) flux `p_h` in a
//! Raviart-Thomas space (order 0 or 1) by solving the dual problem
//! `a*(p,q) = (div p, div q) + (p, q)`, and evaluates the estimator
//!
//! ```text
//! η² = ‖λ_h u_h − W u_h − ζ|u_h|²u_h + div p_h‖₀² + ‖p_h − ∇u_h‖₀²,
//! ```
//!
//! which yields asymptotic lower bounds `λ_h − η ≤ λ` and `E_h − η ≤ E` for
//! the smallest eigenvalue and the ground-state energy. Residual indicators
//! with Dörfler marking drive adaptive bisection refinement; the [`study`]
//! module orchestrates uniform and adaptive experiment runs with CSV output.

pub mod certify;
mod error;
pub mod fem;
pub mod gpe;
pub mod linalg;
pub mod mesh;
pub mod study;

pub use certify::{ErrorCertificate, FluxField, ResidualIndicators};
pub use error::{Error, Result};
pub use fem::{P1Space, QuadratureRule, RtOrder, RtSpace, SparseSymmetricMatrix};
pub use gpe::{GpeProblem, GroundState, ScfOptions};
pub use linalg::SolveReport;
pub use mesh::{DomainPreset, TriangleMesh};
pub use study::{StudyConfig, StudyMode, StudyRow};
