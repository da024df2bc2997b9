//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A correlation matrix is numerically singular and cannot be inverted
    /// exactly, which the marginal-to-joint conversion requires.
    #[error("near-singular instrument correlation: {name} has relative eigenvalue {min_eig:.3e} / {max_eig:.3e} below tolerance")]
    NearSingularCorrelation {
        name: &'static str,
        min_eig: f64,
        max_eig: f64,
    },

    /// The implied residual variance scale of the outcome regression is not
    /// positive; the marginal statistics cannot come from a single data set.
    #[error("inconsistent marginal statistics: implied residual variance factor {value:.6e} is not positive")]
    InconsistentMarginals { value: f64 },

    #[error("rank-deficient instrument design")]
    RankDeficientDesign,

    #[error("degenerate column: {matrix} column {index} has zero variance")]
    DegenerateColumn {
        matrix: &'static str,
        index: usize,
    },

    /// The Q-statistic weight matrix is not positive definite.
    #[error("degenerate weight matrix: eigenvalue {eigenvalue:.6e} below positive-definiteness tolerance")]
    DegenerateWeight { eigenvalue: f64 },

    #[error("over-parameterized support: |S| = {support_size} exceeds the number of instruments m = {m}")]
    OverParameterized { support_size: usize, m: usize },

    #[error("zero residual denominator in AR statistic")]
    ZeroArDenominator,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>) -> Self {
        Error::DimensionMismatch(context.into())
    }

    pub(crate) fn invalid(context: impl Into<String>) -> Self {
        Error::InvalidInput(context.into())
    }

    /// True for failures of numerical procedures on well-formed inputs, as
    /// opposed to malformed input data.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NearSingularCorrelation { .. }
                | Error::InconsistentMarginals { .. }
                | Error::RankDeficientDesign
                | Error::DegenerateColumn { .. }
                | Error::DegenerateWeight { .. }
                | Error::OverParameterized { .. }
                | Error::ZeroArDenominator
        )
    }
}
