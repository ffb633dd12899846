//! Singularity-enriched physics-informed neural networks.
//!
//! The solution of an elliptic problem with corner or edge singularities is
//! split as `u = w + S`, where `S` is a known singular function with
//! trainable coefficients and `w` is a smooth remainder approximated by a
//! small tanh network trained on a penalized collocation loss.

pub mod enrichment;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod optimize;
pub mod problems;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::Point;
