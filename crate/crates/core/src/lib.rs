//! Hybrid quantum-classical image classification.
//!
//! A 4-qubit statevector simulator turns each 2x2 image patch into four
//! Pauli-Z expectations ([`quanv`]); a dense network trained from scratch
//! ([`nn`], [`train`]) classifies the resulting feature maps, and the same
//! network on raw pixels serves as the classical baseline.

mod codec;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod plot;
pub mod quanv;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
