use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VpmeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("right-hand side has mean {mean:e}, Poisson problem on the torus is not solvable")]
    NonZeroMean { mean: f64 },

    #[error("density has mean {mean}, expected unit mass")]
    NonUnitMass { mean: f64 },

    #[error("mollifier radius {0} outside (0, 1/2]")]
    InvalidRadius(f64),

    #[error("nonlinear solve did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("potential reached {max_potential}, exponential would overflow")]
    Overflow { max_potential: f64 },

    #[error("field solve failed at t = {time}: {source}")]
    FieldSolveFailure {
        time: f64,
        #[source]
        source: Box<VpmeError>,
    },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid scenario parameters: {0}")]
    InvalidScenario(String),

    #[error("invalid force model: {0}")]
    InvalidModel(String),

    #[error("field cache is stale, re-solve before computing diagnostics")]
    StaleField,

    #[error("measures have different sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),

    #[error("measure has {0} points, exact solver is capped at {1}")]
    TooLarge(usize, usize),

    #[error("dimension error: {0}")]
    DimensionError(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("distance {0} outside the range of the stability bound")]
    OutOfRange(f64),

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("snapshot dimensions differ ({0} vs {1})")]
    DimMismatch(usize, usize),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VpmeError {
    /// Errors caused by the inputs (configuration, files, arguments) rather
    /// than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            VpmeError::Config { .. }
                | VpmeError::Usage(_)
                | VpmeError::Format { .. }
                | VpmeError::DimMismatch(..)
                | VpmeError::UnknownScenario(_)
                | VpmeError::InvalidScenario(_)
                | VpmeError::InvalidModel(_)
                | VpmeError::InvalidGrid(_)
                | VpmeError::InvalidRadius(_)
                | VpmeError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, VpmeError>;
