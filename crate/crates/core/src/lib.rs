//! Category coherence ranking over entity graphs.
//!
//! Entities get vector representations (trained random-walk embeddings or
//! ingested topic distributions); close neighbors in that space define which
//! categories hang together, scored by conductance or binomial-tail surprise
//! and evaluated against human preference votes.

pub mod coherence;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod grid;
pub mod metrics;
pub mod neighbors;
pub mod report;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureMatrix32 = data::FeatureMatrix<f32>;
pub type FeatureMatrix64 = data::FeatureMatrix<f64>;
pub type NeighborSet32 = neighbors::NeighborSet<f32>;
pub type NeighborSet64 = neighbors::NeighborSet<f64>;
pub type SkipGramModel32 = embed::SkipGramModel<f32>;
pub type SkipGramModel64 = embed::SkipGramModel<f64>;
