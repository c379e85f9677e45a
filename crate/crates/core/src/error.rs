use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid per-unit base: {0}")]
    InvalidBase(String),

    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid fault specification: {0}")]
    InvalidFault(String),

    #[error("singular network: {0}")]
    SingularNetwork(String),
}

pub type Result<T> = std::result::Result<T, Error>;
