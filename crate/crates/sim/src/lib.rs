//! File formats, sweeps and reports around `sisa-core`, plus the `sisa`
//! command-line driver.

pub mod config;
pub mod error;
pub mod models;
pub mod report;
pub mod sweep;
pub mod validate;

pub use config::{Arch, Config};
pub use error::{Error, Result};
