//! Core of the word-context-coupled semantic space (W2CSpace).
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std`: the co-occurrence network and its sampled association
//! matrices, the mapping / reconstruction networks and their alignment
//! training, spherical k-means over word elements, the merge matrix and
//! context-relative distance heads, correction / classification metrics and
//! the context-reversal analysis. File formats, dataset loading and the
//! command line live in the `w2c` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod akn;
pub mod contextspace;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod interp;
pub mod lmhead;
pub mod mapper;
pub mod metrics;
pub mod numkernel;
pub mod seed;

pub use error::{Error, Result};
pub use numkernel::Tensor2;
