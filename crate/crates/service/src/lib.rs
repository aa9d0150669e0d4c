//! Service front end for the wikicheck pipeline: configuration, the
//! end-to-end `Pipeline`, the HTTP API and the command-line tool.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;
pub mod training;

pub use config::PipelineConfig;
pub use pipeline::{Pipeline, PipelineError};
