use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] amrvol_core::Error),
    #[error("render failed: {0}")]
    Render(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    /// Short machine-readable code sent to clients.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Invalid(_) | ServiceError::Core(amrvol_core::Error::InvalidParameter(_)) => "invalid",
            ServiceError::Core(_) | ServiceError::Render(_) => "render_failed",
            ServiceError::Bind { .. } | ServiceError::Io(_) => "internal",
        }
    }
}
