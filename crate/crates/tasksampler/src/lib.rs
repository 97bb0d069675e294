//! Adaptive class-pair task sampling for episodic few-shot training.
//!
//! The library maintains a matrix of class-pair potentials that encodes how
//! confusable every pair of training classes currently is, updates it
//! multiplicatively from the learner's prediction probabilities, and samples
//! K-way episodes whose class combinations are biased toward difficult
//! (or easy, or uncertain) regions of that matrix.
//!
//! Modules:
//! - [`potentials`]: the pair-potential matrix and its multiplicative update.
//! - [`samplers`]: uniform / instance / class / class-pair / greedy class-pair
//!   task sampling, plus exact-enumeration laws for verification.
//! - [`episode`]: K-way-M-shot episode construction over class-indexed data.
//! - [`synthdata`]: synthetic cluster datasets with known hard class pairs.
//! - [`learner`]: a linear prototypical classifier and a deterministic oracle.
//! - [`harness`]: the training loop, strategy comparison, proposition
//!   verification and timing benchmarks behind the CLI.

pub mod episode;
pub mod error;
pub mod harness;
pub mod learner;
pub mod potentials;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod synthdata;
mod tree;

pub use error::{Error, Result};
