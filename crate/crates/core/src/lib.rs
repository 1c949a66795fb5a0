//! Bi-directional memory-chain network for targeted aspect-based sentiment
//! analysis: a from-scratch reverse-mode tape, the gated entity-tracking
//! model, FTRL training with variational dropout, corpus tooling, and the
//! evaluation suite.

pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod model;
pub mod real;
pub mod tape;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
