use thiserror::Error;

/// Errors raised by the market model, optimizers and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain where the formula is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A market instance violates one of its invariants.
    #[error("invalid market: {0}")]
    InvalidMarket(String),

    /// Exhaustive search requested on an instance that is too large.
    #[error("instance too large for exhaustive search: n = {n} exceeds {max}")]
    TooLarge { n: usize, max: usize },

    /// An iterative procedure failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A configuration field holds an unusable value.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
