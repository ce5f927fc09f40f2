use crate::gpe::ScfIterate;
use crate::linalg::SolveReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("triangle index {index} out of range (mesh has {count} triangles)")]
    TriangleOutOfRange { index: usize, count: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operands live on different meshes")]
    MeshMismatch,

    #[error("meshes are not nested by refinement")]
    NotNested,

    #[error("no interior degrees of freedom: mesh too coarse for the Dirichlet problem")]
    NoInteriorDofs,

    #[error(
        "conjugate gradient stalled at relative residual {:.3e} after {} iterations",
        report.final_residual,
        report.iterations
    )]
    CgDidNotConverge { report: SolveReport },

    #[error(
        "eigensolver stalled at relative residual {:.3e} after {} iterations",
        report.final_residual,
        report.iterations
    )]
    EigenDidNotConverge { report: SolveReport },

    #[error("self-consistent iteration did not converge within {iterations} iterations")]
    ScfDidNotConverge {
        iterations: usize,
        log: Vec<ScfIterate>,
    },

    #[error("energy forms disagree by {relative:.3e} relative; quadrature or assembly is inconsistent")]
    EnergyMismatch { relative: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
