//! A layered visual recognition pipeline: oriented edge extraction with
//! winner-take-all inhibition, a growing dictionary of local edge patterns,
//! latency-coded activation waves, whole-map object memory with translation
//! search, feedback-driven refinement, and usage-based dictionary pruning.
//!
//! [`experiment::run_experiment`] drives the full per-stimulus sequence and
//! [`experiment::export`] writes every intermediate product to disk with a
//! checksum manifest, so runs are reproducible byte for byte.

pub mod coding;
pub mod config;
pub mod development;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod it;
pub mod pgm;
pub mod retina;
pub mod synthetic;
pub mod v1;
pub mod v4;
pub mod waves;

pub use error::{Error, Result};
