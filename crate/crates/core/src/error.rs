use thiserror::Error;

/// Errors produced by estimators, oracles and I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("infeasible point: D_x = {d_x:.3e}, D_y = {d_y:.3e}")]
    InfeasiblePoint { d_x: f64, d_y: f64 },

    #[error("optimization failed: every restart was infeasible at initialization (seed {seed})")]
    OptimizationFailed { seed: u64 },

    #[error("search budget exceeded: alphabet size {size} > {limit}")]
    BudgetExceeded { size: usize, limit: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
