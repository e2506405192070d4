use thiserror::Error;

/// Errors raised by estimation, testing, tuning and simulation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("collinear basis {spec}: reciprocal condition {rcond:.3e} below threshold")]
    CollinearBasis { spec: String, rcond: f64 },

    #[error("degenerate statistic: sigma_hat is zero, standardized statistic undefined")]
    DegenerateStatistic,

    #[error("generation of {dgp} produced a non-finite value at step {step}")]
    Generation { dgp: String, step: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rank-deficient design matrix (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },
}

impl Error {
    /// True for numerical failures (singular systems, degenerate statistics),
    /// as opposed to malformed input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CollinearBasis { .. }
                | Error::DegenerateStatistic
                | Error::Generation { .. }
                | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
