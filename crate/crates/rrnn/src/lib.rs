//! Data loading, file formats, rendering and experiment drivers for
//! sparse rational RNNs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod embeddings;
mod error;
pub mod experiment;
pub mod model_io;
pub mod render;
pub mod synth;

pub use error::{Error, Result};
