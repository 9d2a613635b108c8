//! Graph learning for financial return data under the attractive improper
//! Gaussian Markov random field model.
//!
//! The precision matrix of the model is a combinatorial graph Laplacian. The
//! crate estimates it from sample covariance or correlation matrices
//! (connected, k-component and causal time-varying variants), derives
//! spectral market indicators from the estimated graphs, and backtests a
//! connectivity-gated allocation.

// Negated comparisons such as `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod error;
pub mod graphcore;
pub mod pipeline;
pub mod preprocess;
pub mod solvers;
pub mod synth;

pub use error::{GraphError, Result};
pub use graphcore::{GraphWeights, LaplacianMatrix, SpectralSummary};
/// Matrix types in the public API come from this version of nalgebra.
pub use nalgebra;
pub use preprocess::{PricePanel, ReturnsPanel, SimilarityKind, SimilarityMatrix};
pub use solvers::{SolveReport, SolverConfig};
