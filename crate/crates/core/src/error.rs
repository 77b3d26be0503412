use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("membership error: {0}")]
    Membership(String),
    #[error("resource error: {what} needs {required_bytes} bytes, budget is {budget_bytes} bytes")]
    Resource {
        what: String,
        required_bytes: u64,
        budget_bytes: u64,
    },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("fit window too small: {points} usable points, {required} required")]
    WindowTooSmall { points: usize, required: usize },
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::Membership(_) => "membership",
            Error::Resource { .. } => "resource",
            Error::Solver(_) => "solver",
            Error::WindowTooSmall { .. } => "window_too_small",
        }
    }
}
