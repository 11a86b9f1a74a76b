//! Algorithms for condition monitoring of multi-signal industrial time series.
//!
//! The pipeline this crate supports is: clean and normalize the signals,
//! project datapoints to two or three dimensions for visual inspection,
//! partition them with several clustering algorithms, and train one mirrored
//! autoencoder per validated operating state. New datapoints are then scored
//! by their reconstruction error against every state model.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the pipeline
//! service and the command line live in the `hydrodiag` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autoenc;
pub mod classify;
pub mod cluster;
pub mod dimred;
mod error;
pub mod ingest;
pub mod math;
mod matrix;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
