//! Exact recovery of planted partitions in the Stochastic Block Model, run on
//! a simulated s-space MPC cluster with per-round space and traffic
//! accounting.

pub mod algos;
pub mod clustering;
pub mod error;
pub mod eval;
pub mod exact;
pub mod graph;
pub mod mpc;
pub mod ops;
pub mod rng;
pub mod sbm;
pub mod seq;

pub use error::{Error, Result};
pub use graph::{Graph, Vertex};
pub use clustering::{Clustering, Provenance};

