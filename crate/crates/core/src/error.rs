//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error(
        "modal sum did not converge: reached truncation cap n = {cap} (|m| = {m}, omega = {omega})"
    )]
    ModalTruncation { m: i64, cap: usize, omega: f64 },

    #[error("solver failed at bin {bin}: {reason}")]
    Solver { bin: usize, reason: String },

    #[error("regularization schedule exhausted: beta ceiling {ceiling:.3e} reached with LWE {lwe:.3e} > {lwe_max:.3e}")]
    RegularizationExhausted {
        ceiling: f64,
        lwe: f64,
        lwe_max: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
