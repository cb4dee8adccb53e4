use thiserror::Error;

/// Errors raised by the solvers, models and command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined
    /// (for instance `p <= 1`, or evaluating a singular field at `t >= T`).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrability condition violated: {0}")]
    Integrability(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("impact process must be strictly positive ({0})")]
    Positivity(String),

    /// Root-finding or quadrature failed; carries the time-node index.
    #[error("numerical failure at node {node}: {message}")]
    Numerical { node: usize, message: String },

    #[error("regression basis error: {0}")]
    Basis(String),

    #[error("field does not cover the requested nodes: {0}")]
    Coverage(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver inconsistency: {0}")]
    SolverInconsistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code associated with this error class.
    ///
    /// 2 signals a configuration problem (bad input, ill-posed model),
    /// 3 a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Integrability(_)
            | Error::Argument(_)
            | Error::UnsupportedModel(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
