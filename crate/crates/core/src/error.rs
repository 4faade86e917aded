use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate face {face}")]
    DegenerateFace { face: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("cell {cell} is not watertight (normal sum {residual:.3e} vs area {area:.3e})")]
    NotWatertight { cell: usize, residual: f64, area: f64 },

    #[error("cell {cell} has non-positive volume {volume:.3e}")]
    NonPositiveVolume { cell: usize, volume: f64 },

    #[error("cut region not grid-aligned: {0}")]
    CutNotAligned(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mixed Γ unsupported: source touches both the boundary and the interior")]
    MixedGamma,

    #[error("Γ does not intersect the domain: {0}")]
    GammaOutsideDomain(String),

    #[error("query point {point:?} is outside the domain")]
    PointOutsideDomain { point: [f64; 3] },

    #[error("coincident projected centers across face {face}")]
    CoincidentProjectedCenters { face: usize },

    #[error("no Dirichlet data: the seed set is empty")]
    NoDirichletData,

    #[error("sparsity violation: row {row} couples to column {col} outside its face neighborhood")]
    SparsityViolation { row: usize, col: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("stage {stage} did not converge within {iterations} iterations (last residual {residual:.3e})")]
    StageNotConverged { stage: usize, iterations: usize, residual: f64 },

    #[error("no exact-solution oracle for this configuration; supported: {0}")]
    OracleUnavailable(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { context: context.into(), message: message.into() }
    }
}
