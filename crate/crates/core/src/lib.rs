//! Single-shot quantum error correction with surface codes built as chain
//! complexes: code construction, memory circuits, Pauli-frame sampling,
//! detector error models and windowed BP+OSD decoding.

pub mod chain;
pub mod circuit;
pub mod codes;
pub mod decoder;
pub mod dem;
pub mod error;
pub mod experiments;
pub mod f2;
pub mod noise;
pub mod sim;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
