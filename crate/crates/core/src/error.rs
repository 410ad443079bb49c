use thiserror::Error;

use crate::gateway::GatewayError;
use crate::kg::LoadError;
use crate::web::WebError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, mapped onto process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Network,
    Backend,
    Data,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Other => 1,
            ErrorKind::Config => 2,
            ErrorKind::Network => 3,
            ErrorKind::Backend => 4,
            ErrorKind::Data => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Kg(#[from] LoadError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Data(_) | Error::Kg(_) | Error::Json(_) => ErrorKind::Data,
            Error::Gateway(e) => e.kind(),
            Error::Web(e) => e.kind(),
            Error::Io(_) => ErrorKind::Other,
        }
    }
}
