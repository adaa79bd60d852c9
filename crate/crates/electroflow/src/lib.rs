//! Minimum cost flow solver built around an interior point method whose
//! electrical-flow steps are computed locally: congested edges are detected
//! through demand projections onto a congestion reduction subset, maintained
//! by random walks and read out through Schur complements and an l2
//! heavy-hitter sketch, then verified edge by edge by an exact checker.
//!
//! The crate also ships exact combinatorial oracles (successive shortest
//! paths, brute-force enumeration, dense electrical steps) used to certify
//! the localized pipeline at small scale.

pub mod checker;
pub mod dimacs;
pub mod error;
pub mod gen;
pub mod graph;
pub mod ipm;
pub mod linalg;
pub mod locator;
pub mod oracle;
pub mod projection;
pub mod rng;
pub mod schur;
pub mod sketch;
pub mod walks;

pub use error::{Error, Result};
pub use graph::{EdgeVector, FlowInstance, VertexVector};
pub use rng::RngStream;
