use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed or inconsistent experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The truth grid does not hold enough posterior mass.
    #[error("grid bounds too small: grid mass {grid:.6} vs importance-sampling estimate {reference:.6}")]
    BoundsTooSmall { grid: f64, reference: f64 },

    #[error(transparent)]
    Core(#[from] smc_anneal::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for numeric
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use smc_anneal::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Json(_) | HarnessError::Toml(_) => 2,
            HarnessError::Core(E::Usage(_)) | HarnessError::Core(E::Serde(_)) => 2,
            HarnessError::Core(E::Numeric(_) | E::Domain(_) | E::Aborted { .. }) => 3,
            HarnessError::BoundsTooSmall { .. } => 3,
            _ => 1,
        }
    }
}
