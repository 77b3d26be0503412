//! Configuration, ensemble orchestration, result files, SVG plots and the
//! command-line front end on top of `rydchain-core`.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod output;
pub mod plot;

pub use config::RunConfig;
pub use ensemble::{run_cell, run_grid, CellResult, GridResult};
pub use error::{AppError, AppResult};
