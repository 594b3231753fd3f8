//! Spectral identification of networks from sparse time-series measurements.
//!
//! The pipeline recovers the Laplacian spectrum of an unknown coupling graph
//! from trajectories of diffusively coupled dynamical units. Delay-embedded
//! dynamic mode decomposition estimates eigenvalues of the network Jacobian;
//! a small generalized eigenvalue pencil maps each of those back to candidate
//! Laplacian eigenvalues; multiplicity filtering and convex-hull
//! post-processing then extract the spectrum itself or, for large networks,
//! its low-order moments and spectral range.

// Negated comparisons like `!(dt > 0.0)` are NaN guards: they reject NaN
// where the suggested `dt <= 0.0` would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dmd;
pub mod dynamics;
pub mod error;
pub mod geig;
pub mod graph;
pub mod hull;
pub mod identify;
pub mod io;
pub mod pipeline;
pub mod qz;

pub use error::{Error, Result};
