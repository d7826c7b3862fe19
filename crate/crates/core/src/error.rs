use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid cell conditions: {0}")]
    InvalidCellConditions(String),

    #[error("record {index} matches no cell condition: {record}")]
    NoMatchingCell { index: usize, record: String },

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("invalid privacy parameters: {0}")]
    InvalidPrivacy(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e} below -{tolerance:e})")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("workload is not answerable by the strategy (residual {residual:e} > {tolerance:e})")]
    NotAnswerable { residual: f64, tolerance: f64 },

    #[error("degenerate weighting problem: {0}")]
    Degenerate(String),

    #[error("weighting solver did not converge after {iterations} iterations (relative gap {gap:e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        best: Vec<f64>,
    },

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (solver, answerability,
    /// PSD checks) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::RankDeficient(_)
                | Error::NotAnswerable { .. }
                | Error::NotConverged { .. }
                | Error::Degenerate(_)
        )
    }

    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
