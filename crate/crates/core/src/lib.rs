//! Trace-driven simulation of SSD-based I/O caching.
//!
//! The offline side labels traces with a benefit-driven oracle and trains
//! small recurrent models on those labels; the online side replays traces
//! through classic and learned cache policies and reports hit ratio,
//! replacement and SSD-write counts, and modeled latency.

pub mod characterize;
pub mod device;
pub mod engine;
pub mod error;
pub mod nn;
pub mod oracle;
pub mod policies;
pub mod trace;

pub use error::{Error, Result};
