use thiserror::Error;

/// Errors raised by the ladder model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LadderError {
    /// A model or simulation parameter violates its documented constraint.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    /// A scalar argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The joint innovation covariance is not positive semidefinite.
    #[error("innovation covariance is not positive semidefinite: {0}")]
    NotPositiveSemidefinite(String),

    /// The drift certificate Φ(γ, E|r|, f) < 1 fails.
    #[error("not ergodic: Φ(γ, E|r|, f) = {phi_abs:.12} ≥ 1")]
    NotErgodic { phi_abs: f64 },

    /// The rank-one closed form needs Φ(γ, r̄, f) < 1.
    #[error("closed form inapplicable: Φ(γ, r̄, f) = {phi_mean:.12} ≥ 1")]
    ClosedFormInapplicable { phi_mean: f64 },

    /// The Kronecker second-moment operator is not contractive.
    #[error("second moments unavailable: spectral radius of E[B⊗B] = {radius:.12} ≥ 1")]
    SecondMomentUnavailable { radius: f64 },

    /// Normalized issuance left the representable range.
    #[error("divergent: normalized issuance {issuance:e} exceeds the guard")]
    Divergent { issuance: f64 },

    /// No allocation satisfies bounds and the rollover cap.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Two algebraically equivalent computations disagree.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    /// Filesystem or parse failure.
    #[error("io error: {0}")]
    Io(String),
}

impl LadderError {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LadderError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for LadderError {
    fn from(err: std::io::Error) -> Self {
        LadderError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LadderError>;
