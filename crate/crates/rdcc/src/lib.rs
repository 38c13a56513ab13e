//! File formats, model persistence, timed training and the `rdcc`
//! command-line front end around `rdcc-core`.

pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod model_file;
pub mod run;

pub use error::{Error, Result};
