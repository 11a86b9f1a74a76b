//! File formats, persistent project state, the stage runner and the HTTP
//! API around `hydrodiag-core`.
//!
//! A project is one JSON state file holding the configuration, every stage's
//! output and a manifest of stage status. The [`pipeline::Pipeline`] runs
//! stages against it; the CLI and [`server`] are thin layers over that.

mod error;

pub mod config;
pub mod formats;
pub mod pipeline;
pub mod server;
pub mod state;

pub use error::{Error, Result};
