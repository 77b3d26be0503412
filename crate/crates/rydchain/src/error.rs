use std::path::Path;

use thiserror::Error;

pub type AppResult<T> = std::result::Result<T, AppError>;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rydchain_core::Error),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("cell d = {spacing_um} um, w = {disorder_w}: {failed} of {samples} samples failed (first: {first})")]
    CellFailed { spacing_um: f64, disorder_w: f64, failed: usize, samples: usize, first: String },
    #[error("{failed} of {cells} grid cells failed")]
    GridFailed { failed: usize, cells: usize, reports: Vec<String> },
}

impl AppError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        AppError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Usage(_) => "usage",
            AppError::Config(_) => "config",
            AppError::Core(e) => e.kind(),
            AppError::Io { .. } => "io",
            AppError::CellFailed { .. } => "cell_failed",
            AppError::GridFailed { .. } => "grid_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "config" => 3,
            "resource" => 4,
            "domain" | "membership" => 5,
            "solver" => 6,
            "io" => 7,
            "window_too_small" => 8,
            _ => 9,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            AppError::Core(rydchain_core::Error::Resource { required_bytes, budget_bytes, .. }) => {
                v["required_bytes"] = (*required_bytes).into();
                v["budget_bytes"] = (*budget_bytes).into();
            }
            AppError::GridFailed { reports, .. } => v["cells"] = reports.clone().into(),
            _ => {}
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_kind() {
        let errs = [
            AppError::Usage("x".into()),
            AppError::Config("x".into()),
            rydchain_core::Error::Resource { what: "m".into(), required_bytes: 2, budget_bytes: 1 }.into(),
            rydchain_core::Error::Domain("x".into()).into(),
            rydchain_core::Error::Solver("x".into()).into(),
            AppError::Io { path: "p".into(), message: "m".into() },
            rydchain_core::Error::WindowTooSmall { points: 1, required: 20 }.into(),
            AppError::GridFailed { failed: 1, cells: 2, reports: vec![] },
        ];
        let codes: std::collections::BTreeSet<i32> = errs.iter().map(|e| e.exit_code()).collect();
        assert_eq!(codes.len(), errs.len());
        assert!(!codes.contains(&0) && !codes.contains(&1));
        let j = errs[2].to_json();
        assert_eq!(j["error"], "resource");
        assert_eq!(j["budget_bytes"], 1);
    }
}
