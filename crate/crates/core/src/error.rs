use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cells: {0}")]
    InvalidCells(ValidationReport),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0}")]
    Format(#[from] crate::io::FormatError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("image encoding failed: {0}")]
    Image(String),
    #[error("artifact error: {0}")]
    Artifact(String),
}
