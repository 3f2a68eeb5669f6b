use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Operands live in different variable contexts, or a substitution is incomplete.
    #[error("context error: {0}")]
    Context(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// A degree or Fedosov-degree bound is too small for the requested computation.
    #[error("truncation error: {message} (required {required}, have {have})")]
    Truncation {
        message: String,
        required: u32,
        have: u32,
    },

    #[error("not invertible: {0}")]
    NotInvertible(String),

    /// An operation was applied outside its domain (e.g. the symbol of a form).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    /// Truncated power-series data cannot support the requested operation.
    #[error("precision loss: {0}")]
    PrecisionLoss(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A construction produced data that fails its own defining identity.
    #[error("construction failed: {message}; residual {residual}")]
    Construction { message: String, residual: String },

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),

    #[error("linearly dependent basis: {0}")]
    DependentBasis(String),

    /// The linear system of an order-by-order solve has no solution.
    #[error("obstruction at order {order}: {message}")]
    Obstruction { order: u32, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
