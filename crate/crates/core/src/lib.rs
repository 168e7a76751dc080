//! Probing toolkit for per-entity embedding tables.
//!
//! The crate turns knowledge-base dumps into probing datasets
//! ([`taskgen`]), trains linear probes on arbitrary embedding tables
//! ([`probe`]), scores them ([`metrics`]) and runs a small entity-linking
//! harness ([`linker`]).

pub mod embedstore;
pub mod error;
pub mod kbstore;
pub mod linker;
pub mod metrics;
pub mod probe;
pub mod rng;
pub mod taskgen;
mod textio;

pub use error::{Error, Result};
pub use textio::write_atomic;
