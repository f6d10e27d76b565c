use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid site set: {0}")]
    InvalidSites(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("covariance factorization failed even with nugget {nugget:e}: degenerate site set")]
    DegenerateSites { nugget: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
