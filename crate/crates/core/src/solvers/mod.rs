//! Graph Laplacian estimators.
//!
//! * [`learn_connected_mle`]: penalized Laplacian-constrained maximum likelihood.
//! * [`learn_smooth_graph`]: convex smooth-signal formulation with a log-degree barrier.
//! * [`learn_k_component`]: alternating minimization for k-component graphs with
//!   unit node degrees.
//! * [`learn_time_varying`]: causal rolling estimator with a Frobenius
//!   temporal-consistency penalty.
//!
//! All Laplacian solvers optimize over the edge-weight vector, so symmetry,
//! zero row sums and the sign pattern reduce to `w >= 0`. The pseudo-determinant
//! of `L` is evaluated as `det(L + P)` where `P` is the projector onto a known
//! subspace of the null space (`11ᵀ/p` for connected graphs).

mod kcomp;
mod mle;
mod objective;
mod smooth;
mod spg;
mod subproblem;
mod tv;

use serde::{Deserialize, Serialize};

use crate::error::{GraphError, Result};
use crate::graphcore::LaplacianMatrix;

pub use kcomp::{fan_subspace, learn_k_component, learn_k_component_from, relaxed_objective, FanSubspace};
pub use mle::{learn_connected_mle, mle_objective};
pub use smooth::{learn_smooth_graph, smooth_objective};
pub use subproblem::{solve_l_subproblem, subproblem_objective};
pub use tv::{learn_time_varying, TimeVaryingFit};

/// Degree residual the unit-degree subproblem must reach on exit.
pub const DEGREE_TOL: f64 = 1e-6;

/// How the rank-penalty weight evolves across outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EtaSchedule {
    #[default]
    Fixed,
    /// Doubles every outer iteration, capped at `1e4` times the initial value.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Iteration cap for each projected-gradient solve.
    pub max_inner_iters: usize,
    /// Projected-gradient (KKT) residual for convex subproblems.
    pub inner_tol: f64,
    /// Relative Frobenius change of `L` between outer iterations.
    pub outer_tol: f64,
    /// Rank-penalty weight.
    pub eta: f64,
    pub eta_schedule: EtaSchedule,
    /// l1 weight for the MLE and log-degree weight for the smooth formulation.
    pub alpha: f64,
    /// Frobenius weight of the smooth formulation.
    pub gamma: f64,
    /// Temporal-consistency weight.
    pub delta: f64,
    /// Number of graph components.
    pub k: usize,
    /// Number of windows jointly re-estimated at each time-varying step.
    pub memory: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 300,
            max_inner_iters: 20_000,
            inner_tol: 1e-7,
            outer_tol: 1e-5,
            eta: 10.0,
            eta_schedule: EtaSchedule::Fixed,
            alpha: 0.0,
            gamma: 0.0,
            delta: 100.0,
            k: 1,
            memory: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |msg: String| Err(GraphError::InvalidInput(msg));
        if !(self.inner_tol > 0.0) || !(self.outer_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        for (name, v) in [
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.k < 1 || self.k >= p {
            return bad(format!("k must satisfy 1 <= k < p = {p}, got {}", self.k));
        }
        if self.memory < 1 {
            return bad("memory must be >= 1".into());
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        Ok(())
    }
}

/// Worst-case constraint violations of a returned estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ConstraintResiduals {
    /// `max_i |(L1)_i|`
    pub row_sum: f64,
    /// `max_i |L_ii - 1|` for unit-degree problems.
    pub degree: Option<f64>,
    /// Largest positive off-diagonal entry (0 when the sign pattern holds).
    pub sign: f64,
}

impl ConstraintResiduals {
    pub fn of(l: &LaplacianMatrix, unit_degree: bool) -> Self {
        let r = l.check();
        Self {
            row_sum: r.row_sum,
            degree: unit_degree.then(|| l.degrees().iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max)),
            sign: r.max_off_diagonal.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SolveReport {
    pub iterations: usize,
    /// For the k-component solver: the relaxed objective after the initial
    /// estimate and after every V- and L-update. Otherwise the final value.
    pub objective_trace: Vec<f64>,
    pub residuals: ConstraintResiduals,
    /// Final projected-gradient / KKT residual of the last convex solve.
    pub kkt_residual: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

pub(crate) fn check_similarity(s: &nalgebra::DMatrix<f64>) -> Result<()> {
    let p = s.nrows();
    if s.ncols() != p {
        return Err(GraphError::invalid("similarity matrix must be square"));
    }
    if p < 2 {
        return Err(GraphError::invalid("need at least two nodes"));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(GraphError::invalid("similarity matrix has non-finite entries"));
    }
    let scale = s.amax().max(1.0);
    for i in 0..p {
        for j in i + 1..p {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                return Err(GraphError::invalid(format!(
                    "similarity matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}
