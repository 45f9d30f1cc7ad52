use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported space dimension n = {0} (supported: 1, 2, 3)")]
    UnsupportedDimension(usize),

    #[error("node budget exceeded: {requested} nodes requested, budget is {budget}")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error("coefficient field violation: {0}")]
    Coefficient(String),

    #[error("invalid weight: {0}")]
    Weight(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("solver inconsistency: {0}")]
    Inconsistent(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error beneath any added context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
