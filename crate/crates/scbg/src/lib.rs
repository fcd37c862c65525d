//! File formats, artifacts and the command-line pipeline around `scbg-core`.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fsio;
pub mod labels;
pub mod logs;
pub mod pipeline;
pub mod render;
pub mod report;

pub use error::{Error, Result};
