use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the model-construction and scheduling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Discretization gate: a diagonal retention coefficient left (0, 1).
    #[error("unstable discretization: a_ii = {value} for zone {zone} is outside (0, 1); check units or reduce dt")]
    UnstableDiscretization { zone: usize, value: f64 },

    #[error("series length mismatch: {0}")]
    LengthMismatch(String),

    #[error("control input out of range: {0}")]
    InputOutOfRange(String),

    /// Baseline airflow/cooling leaves the actuator box; carries every offending step.
    #[error("baseline control infeasible at {} step(s); first: zone {} step {} ({})",
        .violations.len(), .violations[0].zone, .violations[0].step, .violations[0].what)]
    BaselineInfeasible { violations: Vec<BaselineViolation> },

    #[error("eigen iteration did not converge within {iterations} iterations (residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error("negative matrix entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("denominator below guard at step {step}: sum(q) = {value:e} < {guard:e}")]
    DegenerateDenominator { step: usize, value: f64, guard: f64 },

    #[error("degenerate cooling-power box: {0}")]
    DegenerateBox(String),

    #[error("linear program {0}")]
    Lp(String),

    #[error("surrogate: {0}")]
    Surrogate(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("csv parse error at {path}:{line}: {message}")]
    Csv { path: String, line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One step where the unconstrained baseline solution leaves the VAV box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineViolation {
    pub zone: usize,
    pub step: usize,
    pub what: String,
}
