use thiserror::Error;

/// Errors surfaced by simulation, estimation, and I/O operations.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid confusion matrix: {0}")]
    InvalidConfusionMatrix(String),

    #[error("invalid user profile: {0}")]
    InvalidProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("timing profile '{profile}' does not cover layout {rows}x{cols}")]
    LayoutNotCovered {
        profile: String,
        rows: u32,
        cols: u32,
    },

    #[error("rank method selects nothing: accuracy is undefined")]
    UndefinedAccuracy,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0} unidentifiable: {1}")]
    Unidentifiable(String, String),

    #[error("unknown preset '{0}'; valid presets: {1}")]
    UnknownPreset(String, String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}
