//! Sparse rational recurrent networks.
//!
//! Each hidden unit of a rational RNN is a weighted finite-state automaton
//! (WFSA) whose transition weights are functions of the input word vectors.
//! This crate trains such models with a group-lasso penalty that groups the
//! parameters entering each WFSA state, prunes the states whose groups
//! collapse, and extracts the extreme-scoring paths that make the learned
//! soft patterns readable.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, data loading
//! and the command line live in the `rrnn` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod group_lasso;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod phrases;
pub mod prune;
pub mod search;
pub mod train;
pub mod wfsa;

pub use error::{Error, Result};
pub use group_lasso::PenaltyConfig;
pub use model::{Example, ForwardTrace, RationalModel};
pub use numeric::Label;
pub use prune::PrunedStructure;
pub use wfsa::{PathRecord, TimestepWeights, WfsaShape};
