//! File formats, run configuration and experiment drivers around
//! `softhebb-core`. The `softhebb` binary is a thin clap front end over
//! [`experiments::run`].

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod idx;
pub mod image;
pub mod manifest;
pub mod mixture;
pub mod plot;
pub mod tables;

pub use error::{Error, Result};
