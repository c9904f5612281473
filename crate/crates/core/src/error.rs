use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} outside observation window [0, {tau}]")]
    TimeOutOfRange { t: f64, tau: f64 },

    #[error("dataset contains no events")]
    NoEvents,

    #[error("score variance is zero: {0}")]
    ZeroVariance(String),

    #[error("negative variance estimate {0}")]
    NegativeVariance(f64),

    #[error("singular information matrix")]
    SingularInformation,

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),

    #[error("dataset failed validation ({count} violation(s)); first: {first}")]
    Validation { count: usize, first: String },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("study cell `{cell}` failed: {message}")]
    Cell { cell: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::NoEvents => "no_events",
            Error::ZeroVariance(_) => "zero_variance",
            Error::NegativeVariance(_) => "negative_variance",
            Error::SingularInformation => "singular_information",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NonFinite(_) => "non_finite",
            Error::DatasetMismatch(_) => "dataset_mismatch",
            Error::Validation { .. } => "validation",
            Error::Parse { .. } => "parse",
            Error::Cell { .. } => "study_cell",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
