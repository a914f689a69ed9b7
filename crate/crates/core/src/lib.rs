//! Heterogeneous information network embedding toolkit.
//!
//! Learns d-dimensional node vectors by modeling each edge type as a
//! trainable multilayer transform and each multi-hop relation chain as
//! the composition of those transforms, trained with a negative-
//! sampling skip-gram objective. Includes graph ingestion, samplers,
//! a two-phase trainer and an evaluation harness.

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod sampler;
pub mod synth;
pub mod trainer;
pub mod trajectory;

pub use error::{Error, Result};
