use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid {field}: {message}")]
    Invariant { field: String, message: String },

    #[error("wavelength {wavelength_nm} nm outside profile span [{min_nm}, {max_nm}] nm")]
    OutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no detections: QBER undefined when every click probability is zero")]
    NoDetections,

    #[error("calibration target not bracketable: {0}")]
    Unbracketable(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invariant(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invariant {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the configuration or data files rather than
    /// by the model itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invariant { .. }
                | Error::Io { .. }
                | Error::Json(_)
                | Error::UnknownPreset(_)
        )
    }
}
