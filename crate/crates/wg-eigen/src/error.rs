//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no triangles")]
    Empty,
    #[error("grid resolution must be at least 1")]
    ZeroResolution,
    #[error("triangle {tri} references vertex {vertex} out of range")]
    VertexIndexOutOfRange { tri: usize, vertex: usize },
    #[error("triangle {0} is not counter-clockwise")]
    NotCounterClockwise(usize),
    #[error("edge ({a}, {b}) is shared by more than two triangles")]
    NonManifoldEdge { a: usize, b: usize },
    #[error("triangle index {0} out of range")]
    TriangleIndexOutOfRange(usize),
    #[error("no ancestry at level {requested} (mesh level is {mesh_level})")]
    NoAncestry { requested: u32, mesh_level: u32 },
    #[error("unknown triangulation pattern `{0}`")]
    UnknownPattern(String),
}

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("requested exactness degree {requested} exceeds the supported maximum {max}")]
    DegreeTooHigh { requested: usize, max: usize },
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("polynomial degree must be at least 1")]
    DegreeTooLow,
    #[error("polynomial degree {requested} exceeds the supported maximum {max}")]
    DegreeTooHigh { requested: usize, max: usize },
    #[error("element {0} has a numerically singular mass matrix (degenerate triangle)")]
    SingularElementMass(usize),
    #[error("coefficient vector length {got} does not match space dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("stabilization exponent epsilon must lie in [0, 1), got {0}")]
    EpsilonOutOfRange(f64),
    #[error("trial and test spaces live on incompatible meshes (no refinement ancestry)")]
    IncompatibleMeshes,
    #[error("trial degree {trial} exceeds test degree {test}")]
    DegreeMismatch { trial: usize, test: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("matrix is not positive definite (factorization failed)")]
    FactorizationFailed,
    #[error("requested {requested} eigenpairs but only {available} finite ones exist")]
    TooManyEigenvalues { requested: usize, available: usize },
    #[error("eigensolver did not converge within {iterations} iterations; worst residual {worst_residual:.3e}")]
    NoConvergence {
        iterations: usize,
        worst_residual: f64,
    },
    #[error("linear solver stalled: residual {achieved:.3e} above tolerance {tol:.3e}")]
    LinearSolveStalled { achieved: f64, tol: f64 },
    #[error("problem with {dofs} unknowns is too large for the dense path (limit {limit})")]
    DenseTooLarge { dofs: usize, limit: usize },
    #[error("nev must be at least 1")]
    ZeroEigenvaluesRequested,
}

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("the corrected eigenfunction has zero interior mass (solver failure)")]
    DegenerateCorrection,
    #[error("refinement count must be at least 1")]
    ZeroRefinements,
    #[error("eigenvalue index must be at least 1")]
    ZeroIndex,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("schedule is empty")]
    EmptySchedule,
    #[error(
        "two-grid schedule entry (H=1/{coarse}, h=1/{fine}) is not reachable by red refinement"
    )]
    UnreachableRefinement { coarse: usize, fine: usize },
    #[error("schedule entry 1/{0} exceeds the desk-scale cap; pass --unlock-large to run it")]
    ExceedsDeskScale(usize),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
