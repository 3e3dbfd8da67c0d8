//! File formats, configuration, thread-parallel drivers and the staged
//! command-line pipeline around `xai-core`.

pub mod artifact;
pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod error;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod report;

pub use error::{Result, XaiError};
