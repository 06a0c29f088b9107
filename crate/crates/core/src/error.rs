use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("cannot align column `{column}`: daily date {date} precedes its first observation")]
    Alignment { column: String, date: String },
    #[error("degenerate Markov chain: p11 = {p11}, p22 = {p22}")]
    DegenerateChain { p11: f64, p22: f64 },
    #[error("numeric failure at t = {t}: {msg}")]
    Numeric { t: usize, msg: String },
    #[error("estimation failed: no start converged (best log-likelihood {best_log_likelihood}, {evaluations} evaluations)")]
    Estimation {
        best_log_likelihood: f64,
        evaluations: usize,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("metric `{0}` is undefined for this input")]
    UndefinedMetric(&'static str),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures caused by the numbers themselves rather than by the
    /// caller's input (divergence, underflow, estimation failure).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Numeric { .. }
                | Error::Estimation { .. }
                | Error::Divergence { .. }
                | Error::DegenerateChain { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Parse { .. } | Error::Csv(_))
    }
}
