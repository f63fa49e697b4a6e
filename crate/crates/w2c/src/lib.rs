//! File formats, dataset loading and the command-line pipeline around
//! [`w2c_core`].
//!
//! | artifact            | magic  | module         |
//! |---------------------|--------|----------------|
//! | association network | `W2CA` | [`aknfile`]    |
//! | encoder features    | `W2CE` | [`features`]   |
//! | mapper + recon nets | `W2CM` | [`checkpoint`] |
//! | context space       | `W2CS` | [`checkpoint`] |
//! | toy encoder         | `W2CT` | [`checkpoint`] |
//! | task head           | `W2CH` | [`checkpoint`] |
//!
//! Everything is written through a temporary file and renamed into place.

pub mod aknfile;
pub mod binio;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod synth;

pub use error::{Result, W2cError};
