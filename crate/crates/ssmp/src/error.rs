use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document or parameter set is malformed. `path` points
    /// at the offending key (`quintuple.triplet.pi.atoms[0].mass`).
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("measure is not integrable: {0}")]
    NotIntegrable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
