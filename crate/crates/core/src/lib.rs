//! Process tensors, stochastic Pauli processes, temporal correlation
//! analysis and memory-aware quantum error correction benchmarks.

pub mod cli;
pub mod correlation;
pub mod error;
pub mod layout;
pub mod pauli;
pub mod process;
pub mod qca;
pub mod qec;
pub mod rng;
pub mod spp;
pub mod storm;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
