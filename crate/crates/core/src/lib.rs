//! Character-level clinical entity tagger built from a residual dilated
//! convolutional encoder and a linear-chain CRF.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, timing and
//! the command-line front end live in the `rdcc` companion crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corpus;
pub mod crf;
pub mod dictionary;
pub mod encoder;
mod error;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod tags;
pub mod trainer;

pub use error::{Error, Result};
pub use model::{CharVocab, Model, ModelParams};
pub use tags::{EntitySpan, EntityType, Marker, Tag};
