//! Configuration, in-memory stage functions and the file-based stages.

pub mod analysis;
pub mod config;
pub mod stages;

pub use analysis::Analysis;
pub use config::Config;
pub use stages::{Outcome, Stage, Workspace};
