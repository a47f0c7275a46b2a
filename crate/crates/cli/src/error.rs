use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dp4d::Error),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("cache error: {0}")]
    Cache(String),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Usage(_) => "usage",
            CliError::Io { .. } | CliError::Csv(_) => "io",
            CliError::Cache(_) => "cache",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "config" => 3,
            "format" => 4,
            "labeling" => 5,
            "numerical" => 6,
            "estimator" => 7,
            "calibration" => 8,
            "reach" => 9,
            "solver" => 10,
            "io" => 11,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
