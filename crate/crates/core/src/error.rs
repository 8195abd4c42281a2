use thiserror::Error;

/// Errors raised by the library. Each variant names the module it comes from
/// so that the CLI can report the wrapped error verbatim.
#[derive(Debug, Error)]
pub enum GlarError {
    #[error("model: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("model: invalid model: {0}")]
    InvalidModel(String),

    #[error("simulator: unstable trajectory at t={t}: Poisson rate {rate:e} exceeds 1e9")]
    UnstableTrajectory { t: usize, rate: f64 },

    #[error("simulator: infeasible sparsity: {0}")]
    InfeasibleSparsity(String),

    #[error("estimator: divergent step at iteration {iteration} (row {row})")]
    DivergentStep { row: usize, iteration: usize },

    #[error("estimator: invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("theory: precondition violated: {0}")]
    Precondition(String),

    #[error("theory: stationary formula requires symmetry")]
    NotSymmetric,

    #[error("experiments: insufficient cells: {0}")]
    InsufficientCells(String),

    #[error("config: line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config: invalid field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GlarError>;
