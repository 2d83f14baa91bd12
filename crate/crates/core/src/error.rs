use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {modes}-mode register")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("space mismatch: {0}")]
    SpaceMismatch(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("generator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("outcome {outcome} lies outside the grid half-width {half_width}")]
    OutsideGrid { outcome: f64, half_width: f64 },
    #[error("grid does not cover the marginal: {0}")]
    GridCoverage(String),
    #[error("marginal variance {0:e} is singular")]
    SingularMarginal(f64),
    #[error("marginal distribution vanishes on the grid")]
    DegenerateMarginal,
    #[error("truncation leakage {leakage:e} exceeds {threshold:e}")]
    Leakage { leakage: f64, threshold: f64 },
    #[error("photon-number sector violated: {0}")]
    Sector(String),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid measurement program: {0}")]
    Program(String),
    #[error("input is not normalized (norm² = {0})")]
    Unnormalized(f64),
    #[error("phase polynomial of degree {0} is not implementable by a basis change; use the offline gates")]
    NonQuadratic(usize),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
