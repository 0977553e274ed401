//! Distributed detection of sparse Bernoulli-Gaussian signals from
//! quantized sensor reports when some sensors are Byzantine.
//!
//! The crate covers the sensing and attack models, the fusion rules
//! (clairvoyant LRT, GLRT, quantized LMPT, their reference-sensor variants
//! and reputation-filtered enhancements), Gaussian-approximation
//! performance analysis, and a seeded Monte Carlo harness.

pub mod analysis;
pub mod channel;
pub mod detectors;
pub mod error;
pub mod model;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
