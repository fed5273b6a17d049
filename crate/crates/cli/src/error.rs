use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario rejected before any computation; `path` locates the offending field.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Engine(#[from] subrig::Error),
}

impl CliError {
    pub fn schema(path: &str, message: String) -> Self {
        CliError::Schema { path: path.to_string(), message }
    }
}

impl From<subrig::integrate::IntegrateError> for CliError {
    fn from(e: subrig::integrate::IntegrateError) -> Self {
        CliError::Engine(e.into())
    }
}
