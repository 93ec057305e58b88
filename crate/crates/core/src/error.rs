use thiserror::Error;

pub type Result<T, E = TailError> = std::result::Result<T, E>;

/// Everything that can go wrong while estimating, selecting or simulating.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    /// A parameter or data value lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample too small: need at least {min} values, got {got}")]
    Size { min: usize, got: usize },

    /// An order-statistic index (k0, k, rank) is out of range.
    #[error("index error: {0}")]
    Index(String),

    /// An estimate used as a denominator vanished.
    #[error("degenerate sample: trimmed Hill estimate is zero at k0 = {k0}")]
    Degenerate { k0: usize },

    #[error("selection failure: {0}")]
    Selection(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<TailError>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("simulation aborted: {0}")]
    Simulation(String),
}

impl TailError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        TailError::Domain(msg.into())
    }

    pub(crate) fn index(msg: impl Into<String>) -> Self {
        TailError::Index(msg.into())
    }

    /// True for errors caused by bad input or arguments rather than by the
    /// data defeating a computation.
    pub fn is_validation(&self) -> bool {
        match self {
            TailError::Domain(_)
            | TailError::Size { .. }
            | TailError::Index(_)
            | TailError::Parse { .. }
            | TailError::Io(_) => true,
            TailError::Degenerate { .. } | TailError::Selection(_) | TailError::Simulation(_) => {
                false
            }
            TailError::Iteration { source, .. } => source.is_validation(),
        }
    }
}

impl From<std::io::Error> for TailError {
    fn from(e: std::io::Error) -> Self {
        TailError::Io(e.to_string())
    }
}
