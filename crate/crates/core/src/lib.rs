//! Circuit quantization, spectra, CZ pulse synthesis and gate simulation for
//! transmons joined by flux-tunable SQUID couplers.

pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod noise;
pub mod perturbation;
pub mod pulse;
pub mod spectrum;

pub use error::{Error, Result};
