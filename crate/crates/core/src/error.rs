use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigenvalue tuple outside the closed cone Gamma_{k}: S_{j} = {margin:e}")]
    OutsideCone { k: usize, j: usize, margin: f64 },

    #[error("admissibility lost at node {node:?}: S_{j} = {margin:e}")]
    AdmissibilityLost { node: Vec<usize>, j: usize, margin: f64 },

    #[error("field not admissible at x = {x:?}: S_{j} = {margin:e}")]
    InadmissibleAt { x: Vec<f64>, j: usize, margin: f64 },

    #[error("matrix is not symmetric: |w_{i}{j} - w_{j}{i}| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("source B must be positive, got B = {value:e} at x = {x:?}, z = {z:e}, p = {p:?}")]
    NonPositiveSource {
        value: f64,
        x: Vec<f64>,
        z: f64,
        p: Vec<f64>,
    },

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("z-derivatives unavailable for `{0}`")]
    MissingDerivative(String),

    #[error("matrix is not orthogonal: |Q^T Q - I| = {0:e}")]
    NotOrthogonal(f64),

    #[error("rotation does not map the box onto an axis-aligned box")]
    RotationBreaksBox,

    #[error("Newton did not converge at stage {stage} (t = {t}), iteration {iteration}, residual {residual:e}")]
    NoConvergence {
        stage: usize,
        t: f64,
        iteration: usize,
        residual: f64,
    },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("field file: {0}")]
    FieldFormat(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("config schema violation at {pointer}: {reason}")]
    ConfigSchema { pointer: String, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
