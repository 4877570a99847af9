//! IO, benchmarking and experiment orchestration around `waferlite-core`.

pub mod bench;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod pgm;
pub mod report;
pub mod store;

pub use error::{Error, Result};
