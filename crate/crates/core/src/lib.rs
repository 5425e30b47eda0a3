//! Lewis bases of subspaces of Schatten classes, low-distortion `S_p -> S_q`
//! embeddings, diamond and Laakso graph metrics, and exact Markov 2-convexity
//! evaluation.

pub mod cli;
pub mod convexity;
pub mod embedding;
pub mod error;
pub mod graphs;
pub mod lewis;
pub mod matrix_io;
pub mod random;
pub mod reports;
pub mod spectral;

pub use error::{GeoError, Result};
