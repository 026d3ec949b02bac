use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which detectability condition a design alternative violates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolatedBound {
    /// Conditional power cannot exceed 50% for any trial precision.
    ConditionalDetectability,
    /// The requested unconditional power exceeds the maximum attainable.
    UnconditionalDetectability,
}

impl std::fmt::Display for ViolatedBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ConditionalDetectability => {
                f.write_str("conditional detectability bound (alternative not detectable with conditional power above 50%)")
            }
            Self::UnconditionalDetectability => {
                f.write_str("unconditional detectability bound (target power above the maximum unconditional power)")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("design infeasible: violates the {bound}")]
    Infeasible { bound: ViolatedBound },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidInput { field, reason: reason.into() }
    }

    pub(crate) fn domain(reason: impl Into<String>) -> Self {
        Self::Domain(reason.into())
    }

    pub(crate) fn precondition(reason: impl Into<String>) -> Self {
        Self::Precondition(reason.into())
    }
}
