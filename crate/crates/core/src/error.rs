use crate::adm::AdmError;
use crate::ddl::DdlError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Adm(#[from] AdmError),
    #[error(transparent)]
    Ddl(#[from] DdlError),
    /// Duplicate names, dangling references and other catalog rule violations.
    #[error("{0}")]
    Catalog(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0} is gone")]
    Gone(String),
    #[error("type mismatch: {0}")]
    Type(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    /// An operation that conflicts with the entity's current state, such as
    /// starting a running feed.
    #[error("{0}")]
    State(String),
    #[error("remote island: {0}")]
    Remote(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn catalog(msg: impl Into<String>) -> Self {
        Error::Catalog(msg.into())
    }

    pub(crate) fn eval(msg: impl Into<String>) -> Self {
        Error::Eval(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
