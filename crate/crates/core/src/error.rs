use thiserror::Error;

/// Errors produced by the prediction, simulation and metric routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("labeling error: {0}")]
    Labeling(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite sample at split step {step} of span {span}")]
    Numerical { span: u32, step: usize },

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("reach error: {0}")]
    Reach(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, stable across releases.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Format(_) => "format",
            Error::Labeling(_) => "labeling",
            Error::Config(_) => "config",
            Error::Numerical { .. } => "numerical",
            Error::Estimator(_) => "estimator",
            Error::Calibration(_) => "calibration",
            Error::Reach(_) => "reach",
            Error::Solver(_) => "solver",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
