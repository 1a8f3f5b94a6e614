use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd {
        what: &'static str,
        min_eigenvalue: f64,
    },

    #[error("{0} is singular or not positive definite")]
    Singular(&'static str),

    #[error("point outside the feasible cone: {0}")]
    Infeasible(&'static str),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("line search found no admissible step after {halvings} halvings")]
    LineSearch { halvings: u32 },

    #[error("predicted decrease {delta:e} is not negative")]
    NotDescent { delta: f64 },

    #[error("linear solve stalled: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("estimation window {index} failed: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures caused by the caller's input rather than by a numerical routine.
    pub fn is_user_error(&self) -> bool {
        if let Error::Window { source, .. } = self {
            return source.is_user_error();
        }
        !matches!(
            self,
            Error::Bracket(_)
                | Error::LineSearch { .. }
                | Error::NotDescent { .. }
                | Error::LinearSolve { .. }
        )
    }
}
