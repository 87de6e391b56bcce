use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// |h| = 0: both hypotheses produce the same received variance.
    #[error("degenerate channel: |h| = 0 makes both hypotheses identical")]
    DegenerateChannel,

    /// An iterative or adaptive routine ran out of budget.
    #[error("no convergence: {what} (best estimate {estimate:e}, error bound {error_bound:e})")]
    Convergence {
        what: String,
        estimate: f64,
        error_bound: f64,
    },

    /// A user-supplied configuration field is invalid.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// A computed result failed a sanity check (e.g. a probability far outside [0, 1]).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
