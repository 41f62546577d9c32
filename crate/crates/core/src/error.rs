use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Condition 2 violated: {0}")]
    ConditionViolated(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature cutoff too small: tail remainder {remainder:.3e} exceeds tolerance {tolerance:.3e}")]
    CutoffTooSmall { remainder: f64, tolerance: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("not integrable: {0}")]
    NotIntegrable(String),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("top eigenvalues nearly degenerate: mu1 - mu2 = {gap:.3e}")]
    DegenerateGap { gap: f64 },

    #[error("point {x} lies outside the grid [-{half_width}, {half_width}]")]
    OutOfGrid { x: f64, half_width: f64 },

    #[error("transition kernel row {row} has raw mass {mass:.6}")]
    RowMassError { row: usize, mass: f64 },

    #[error("lifetime exceeded the simulation cap T_cap = {cap}")]
    CapExceeded { cap: f64 },

    #[error("only {survivors} survivors at t = {t}; need at least {required}")]
    InsufficientTail {
        survivors: usize,
        t: f64,
        required: usize,
    },

    #[error("Metropolis acceptance {rate:.3} outside [0.15, 0.6]")]
    AcceptanceOutOfRange { rate: f64 },

    #[error("observable pair was not registered with the sampler")]
    UnregisteredObservable,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
