//! Training pipelines, file formats and the command-line front end for
//! meta-learned reduced-complexity system identification.
//!
//! The numerical work lives in [`manifold_sysid_core`]; this crate adds
//! threads, wall-clock timing, JSON/CSV persistence and the CLI.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use error::{Result, SysidError};
