//! Branched transport networks approximated by atomic Wasserstein relaxations.
//!
//! Adding `n` free atoms to both sides of a transport problem and optimizing
//! their positions yields plans whose induced networks converge, after the
//! rescaling `n^{1−1/q}`, to optimal branched (Gilbert–Steiner type) networks
//! with cost `Σ |e|·m_e^{1/q}`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocate;
pub mod error;
pub mod experiment;
pub mod geometry;
mod linalg;
pub mod measures;
pub mod network;
pub mod oracle;
pub mod positions;
pub mod regularize;
pub mod render;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations of the generic types.
pub type Config = measures::SignedConfig<f64>;
pub type Params = measures::CostParams<f64>;
pub type Atoms = transport::FreeAtoms<f64>;
pub type Plan = transport::TransportPlan<f64>;
pub type Graph = network::WeightedDigraph<f64>;
pub type Tree = network::ReducedTree<f64>;
pub type Solution = positions::SolveResult<f64>;
pub type OracleResult = oracle::OracleSolution<f64>;
pub type Record = experiment::SweepRecord<f64>;
