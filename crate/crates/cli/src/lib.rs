//! Library side of the `glmdesign` command-line tool: problem files,
//! commands and output formats.

pub mod bench;
pub mod commands;
pub mod error;
pub mod output;
pub mod problem;

pub use error::{CliError, CliResult};
pub use problem::ProblemFile;
