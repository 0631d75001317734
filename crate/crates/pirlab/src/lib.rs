//! Private information retrieval over graph-replicated storage.
//!
//! Servers are vertices of a (multi)graph and every file is an edge, stored by
//! exactly its two endpoints. The crate builds and checks deterministic schemes
//! over complete graphs, extracts recovery patterns from arbitrary schemes,
//! turns them into subpacketization-1 probabilistic schemes, runs the universal
//! probabilistic scheme on any graph and evaluates capacity bounds exactly.

pub mod bounds;
pub mod builder;
pub mod error;
pub mod exec;
pub mod general;
pub mod graph;
pub mod patterns;
pub mod rational;
pub mod scheme;
pub mod sequences;
pub mod sim;
pub mod transform;

pub use error::{Error, Result};
pub use exec::Exec;
pub use graph::{FileId, Graph};
pub use rational::Q;
