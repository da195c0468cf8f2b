use std::io;
use std::path::PathBuf;

/// Errors raised by the toolkit.
///
/// Variants follow the failure classes of the analyses: malformed files,
/// shape problems, violated preconditions, degenerate inputs (zero rows,
/// constant vectors) and cross-file consistency problems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    /// An accuracy of exactly 0 or 1 (or outside the unit interval) has no finite logit.
    #[error("infinite logit: accuracy {value} ({what}) must lie in the open interval (0, 1)")]
    InfiniteLogit { what: String, value: f64 },

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("undefined average precision: {0}")]
    UndefinedAp(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &str) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
