//! Weighted non-backtracking spectra of sparse inhomogeneous random graphs.
//!
//! The crate samples graphs from a couple `(P, W)` of edge probabilities and
//! weight laws, builds the sparse non-backtracking operator `B`, computes its
//! spectrum (dense oracle or restarted Arnoldi), evaluates the deterministic
//! predictions for the outliers and the bulk, and checks matrix perturbation
//! certificates and tree/Poisson moment identities against Monte-Carlo
//! simulation at desk scale.

pub mod error;
pub mod rng;
pub mod model;
pub mod sample;
pub mod nbop;
pub mod eigs;
pub mod theory;

pub use error::{Error, Result};
