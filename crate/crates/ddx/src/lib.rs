//! Standard-library companion to `ddx-core`: file formats, experiment
//! configuration, the HTTP chat channel, parallel batches and the `ddx`
//! command line.

pub mod batch;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod llm;
pub mod pipeline;

pub use ddx_core as core;
pub use error::{Error, Result};
