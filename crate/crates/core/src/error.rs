use thiserror::Error;

/// Error taxonomy shared by the library, the CLI (exit codes) and the HTTP
/// service (machine-readable codes).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated an operation's precondition.
    #[error("domain error: {0}")]
    Domain(String),
    /// A variance estimate collapsed to zero (e.g. an interim proportion of 0 or 1).
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),
    /// A statistical estimate could not be formed from the data.
    #[error("estimation error: {0}")]
    Estimation(String),
    /// An iterative routine failed to converge or produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A request exceeded a configured computation-size cap.
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain_error",
            Error::DegenerateVariance(_) => "degenerate_variance",
            Error::Estimation(_) => "estimation_error",
            Error::Numerical(_) => "numerical_failure",
            Error::SizeCap(_) => "size_cap_exceeded",
        }
    }

    /// The violated precondition or failure detail, without the category prefix.
    pub fn detail(&self) -> &str {
        match self {
            Error::Domain(m)
            | Error::DegenerateVariance(m)
            | Error::Estimation(m)
            | Error::Numerical(m)
            | Error::SizeCap(m) => m,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Returns `Error::Domain` carrying the precondition text when `cond` is false.
macro_rules! require {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::Domain(format!($($msg)+)));
        }
    };
}

pub(crate) use require;
