//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial order must be at least 2, got {n}")]
    InvalidOrder { n: usize },

    #[error("unsupported derivative order {order} (only 1 and 2)")]
    UnsupportedDiffOrder { order: usize },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("kernel lag must be nonnegative, got {tau}")]
    NegativeLag { tau: f64 },

    #[error("history inconsistent with requested time: {message}")]
    InconsistentHistory { message: String },

    #[error("initial condition violates boundary values by {deviation:.3e} (tolerance 1e-12)")]
    BoundaryMismatch { deviation: f64 },

    #[error("implicit operator is singular; the time-stepping configuration is broken")]
    SingularOperator,

    #[error(
        "fBM covariance matrix is not numerically positive definite; \
         add diagonal jitter or use fewer sample points"
    )]
    CovarianceFactorization,

    #[error("Hurst parameter must lie in (0, 1), got {h}")]
    InvalidHurst { h: f64 },

    #[error("fBM path needs at least 2 samples to form increments")]
    PathTooShort,

    #[error("subgrid signal has zero ensemble spread at time index {time_index}")]
    DegenerateSignal { time_index: usize },

    #[error(
        "drift basis is numerically rank deficient \
         (Gram condition number {condition:.3e}); the fitted field may be constant"
    )]
    DegenerateFit { condition: f64 },

    #[error("ensemble must have at least {required} members, got {actual}")]
    InsufficientEnsemble { required: usize, actual: usize },

    #[error("trajectory collections are misaligned: {message}")]
    Alignment { message: String },

    #[error("model provenance does not match the run configuration: {message}")]
    ProvenanceMismatch { message: String },

    #[error("solution blew up at step {step} (max |u| = {max_abs:.3e} > {limit})")]
    BlowUp { step: usize, max_abs: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing prerequisite artifact {path}; run `sles {produced_by}` first")]
    MissingArtifact { path: String, produced_by: &'static str },

    #[error("malformed artifact {path}: {message}")]
    MalformedArtifact { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 missing artifact,
    /// 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ProvenanceMismatch { .. } => 2,
            Error::MissingArtifact { .. } => 3,
            Error::BlowUp { .. } | Error::CovarianceFactorization | Error::SingularOperator => 4,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(Error::Config("bad".into()).exit_code(), 2);
        assert_eq!(
            Error::ProvenanceMismatch {
                message: "drift".into()
            }
            .exit_code(),
            2
        );
        assert_eq!(
            Error::MissingArtifact {
                path: "x".into(),
                produced_by: "calibrate"
            }
            .exit_code(),
            3
        );
        assert_eq!(
            Error::BlowUp {
                step: 3,
                max_abs: 11.0,
                limit: 10.0
            }
            .exit_code(),
            4
        );
        assert_eq!(Error::CovarianceFactorization.exit_code(), 4);
        assert_eq!(Error::PathTooShort.exit_code(), 1);
    }
}
