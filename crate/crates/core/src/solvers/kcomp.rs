//! k-component graph learning by alternating minimization.
//!
//! The relaxed problem couples `L` with an orthonormal `V ∈ R^{p×k}`:
//!
//! ```text
//! minimize  tr(LS) - log gdet(L) + eta * tr(Vᵀ(L + S)V)
//! s.t.      L Laplacian, diag(L) = 1, VᵀV = I
//! ```
//!
//! `log gdet(L)` is evaluated as `log det(L + VVᵀ)`. That equals the
//! pseudo-determinant whenever `V` spans the null space of `L`, reduces to
//! `log det(L + 11ᵀ/p)` for `k = 1`, and stays finite for k-component
//! graphs, so cross-component weights can reach exactly zero.
//!
//! The spectral penalty charges `V` for both graph energy `tr(VᵀLV)` and
//! data energy `tr(VᵀSV)`. Under the improper GMRF model the null space of
//! the true Laplacian is exactly where the data has no variance, so both
//! terms vanish there. Penalizing the graph energy alone is blind to that:
//! samples with zero mean on every component are negatively correlated
//! within a component, so `tr(LS)` rewards weight across components and the
//! graph-only relaxation prefers a wrong partition.
//!
//! The V-step takes the k bottom eigenvectors of `L + S` (the constant
//! vector always first); the L-step is the unit-degree subproblem with
//! `K = S + eta VVᵀ` (the data term does not depend on `L`). Both steps
//! are only accepted when they do not increase the objective, so the trace
//! is nonincreasing.

use nalgebra::DMatrix;

use super::objective::{constant_projector, to_laplacian};
use super::subproblem::{solve_unit_degree, UnitDegreeSolution};
use super::{check_similarity, ConstraintResiduals, EtaSchedule, SolveReport, SolverConfig};
use crate::error::{GraphError, Result};
use crate::graphcore::{num_components, sym_eigen, LaplacianMatrix};
use crate::preprocess::SimilarityMatrix;

/// Orthonormal basis minimizing `tr(VᵀLV)`.
#[derive(Debug, Clone)]
pub struct FanSubspace {
    /// `p × k`, first column is the normalized constant vector.
    pub basis: DMatrix<f64>,
    /// `tr(VᵀLV)`.
    pub trace: f64,
    /// `lambda_k == lambda_{k+1}`: any basis of the tied eigenspace attains the minimum.
    pub degenerate: bool,
}

impl FanSubspace {
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Eigenvectors of the `k` smallest eigenvalues of `L`.
///
/// Uses the spectrum of `L - 11ᵀ/p`, which moves the constant vector to
/// eigenvalue -1 and leaves everything orthogonal to it unchanged, so the
/// constant vector is always part of the basis even when `L` has more than
/// `k` zero eigenvalues.
pub fn fan_subspace(l: &LaplacianMatrix, k: usize) -> Result<FanSubspace> {
    fan_subspace_of(l.matrix(), k)
}

/// Same as [`fan_subspace`] for any symmetric `m`: the constant vector
/// first, then the bottom eigenvectors of `m` compressed to the complement
/// of the constant vector.
fn fan_subspace_of(m: &DMatrix<f64>, k: usize) -> Result<FanSubspace> {
    let p = m.nrows();
    if k < 1 || k >= p {
        return Err(GraphError::invalid(format!("k must satisfy 1 <= k < p = {p}, got {k}")));
    }
    let j = constant_projector(p);
    let centering = DMatrix::identity(p, p) - &j;
    // Strictly below every other eigenvalue: |eig| <= p * max|m_ij|.
    let floor = 1.0 + m.amax() * p as f64;
    let shifted = &centering * m * &centering - j * floor;
    let eig = sym_eigen(&shifted);
    let mut basis = eig.vectors.columns(0, k).into_owned();
    let c = 1.0 / (p as f64).sqrt();
    basis.column_mut(0).fill(c);
    // Re-orthogonalize the remaining columns against the exact constant.
    for j in 1..k {
        let dot = basis.column(j).sum() * c;
        let mut col = basis.column(j) - basis.column(0) * dot;
        for i in 1..j {
            let d = col.dot(&basis.column(i));
            col -= basis.column(i) * d;
        }
        let norm = col.norm();
        basis.column_mut(j).copy_from(&(col / norm));
    }
    let trace = (basis.transpose() * m * &basis).trace();
    let scale = eig.values[p - 1].abs().max(1.0);
    let degenerate = (eig.values[k] - eig.values[k - 1]).abs() <= 1e-10 * scale;
    Ok(FanSubspace {
        basis,
        trace,
        degenerate,
    })
}

/// `tr(LS) - log det(L + VVᵀ) + eta tr(Vᵀ(L + S)V)`, or `None` when
/// `L + VVᵀ` is singular.
pub fn relaxed_objective(s: &DMatrix<f64>, l: &LaplacianMatrix, v: &DMatrix<f64>, eta: f64) -> Option<f64> {
    let vvt = v * v.transpose();
    let chol = (l.matrix() + &vvt).cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let tr_ls = (l.matrix() * s).trace();
    let tr_penalty = (v.transpose() * (l.matrix() + s) * v).trace();
    Some(tr_ls - logdet + eta * tr_penalty)
}

/// k-component estimate starting from the unit-degree subproblem on `S`.
pub fn learn_k_component(s: &SimilarityMatrix, cfg: &SolverConfig) -> Result<(LaplacianMatrix, SolveReport)> {
    learn_k_component_from(s, None, cfg)
}

/// k-component estimate from a user-supplied initial Laplacian.
pub fn learn_k_component_from(
    s: &SimilarityMatrix,
    initial: Option<&LaplacianMatrix>,
    cfg: &SolverConfig,
) -> Result<(LaplacianMatrix, SolveReport)> {
    check_similarity(&s.entries)?;
    let p = s.p();
    cfg.validate(p)?;
    let k = cfg.k;
    let s_mat = &s.entries;

    let init: UnitDegreeSolution = solve_unit_degree(s_mat, &constant_projector(p), None, None, cfg)?;
    let mut w = match initial {
        Some(l0) => {
            if l0.p() != p {
                return Err(GraphError::DimensionMismatch {
                    expected: p,
                    actual: l0.p(),
                });
            }
            l0.weights().into_vec()
        }
        None => init.w.clone(),
    };
    let mut l = to_laplacian(p, &w);
    let mut dual = init.dual.clone();
    let mut inner_iterations = init.report.iterations;

    let mut eta = cfg.eta;
    let eta_cap = cfg.eta * 1e4;
    let mut report = SolveReport::default();
    let data_energy = |l: &LaplacianMatrix| fan_subspace_of(&(l.matrix() + s_mat), k);
    let mut v = data_energy(&l)?.basis;
    if let Some(v0) = relaxed_objective(s_mat, &l, &v, eta) {
        report.objective_trace.push(v0);
    }
    let mut converged = false;
    let mut last_kkt = init.report.kkt_residual;
    let mut inner_ok = true;
    let mut degenerate_steps = 0;
    let mut rejected_steps = 0;

    for iter in 0..cfg.max_outer_iters {
        report.iterations = iter + 1;
        // V-step. The eigenvector basis minimizes the penalty but not
        // necessarily the log-determinant, so keep the old basis if the
        // objective would go up.
        let fan = data_energy(&l)?;
        if fan.degenerate {
            degenerate_steps += 1;
        }
        let current = relaxed_objective(s_mat, &l, &v, eta);
        let candidate = relaxed_objective(s_mat, &l, &fan.basis, eta);
        let before = match (current, candidate) {
            (Some(c), Some(n)) if n > c => current,
            (_, None) => current,
            _ => {
                v = fan.basis;
                candidate
            }
        };
        let proj = &v * v.transpose();
        if let Some(b) = before {
            report.objective_trace.push(b);
        }

        // L-step.
        let k_eff = s_mat + &proj * eta;
        let sol = solve_unit_degree(&k_eff, &proj, Some(&w), Some(&dual), cfg)?;
        inner_iterations += sol.report.iterations;
        last_kkt = sol.report.kkt_residual;
        inner_ok = sol.report.converged;
        let l_new = sol.laplacian();
        let after = relaxed_objective(s_mat, &l_new, &v, eta);

        let accept = match (before, after) {
            (Some(b), Some(a)) => a <= b,
            (None, Some(_)) => true,
            _ => false,
        };
        let change = if accept {
            let change = (l_new.matrix() - l.matrix()).norm() / l.frobenius_norm().max(f64::MIN_POSITIVE);
            w = sol.w;
            dual = sol.dual;
            l = l_new;
            if let Some(a) = after {
                report.objective_trace.push(a);
            }
            change
        } else {
            // The previous iterate is the better solution of this L-step.
            rejected_steps += 1;
            if let Some(b) = before {
                report.objective_trace.push(b);
            }
            0.0
        };

        if change <= cfg.outer_tol && (cfg.eta_schedule == EtaSchedule::Fixed || eta >= eta_cap) {
            converged = true;
            break;
        }
        if cfg.eta_schedule == EtaSchedule::Geometric {
            eta = (eta * 2.0).min(eta_cap);
        }
    }

    report.residuals = ConstraintResiduals::of(&l, true);
    report.kkt_residual = last_kkt;
    report.converged = converged && inner_ok;
    if !converged {
        report
            .warnings
            .push(format!("outer loop hit max_outer_iters = {}", cfg.max_outer_iters));
    }
    if !inner_ok {
        report.warnings.push("last L-step did not reach its tolerance".into());
    }
    if degenerate_steps > 0 {
        report.warnings.push(format!(
            "lambda_k == lambda_(k+1) in {degenerate_steps} V-steps; eigenvector order taken as returned"
        ));
    }
    if rejected_steps > 0 {
        report.warnings.push(format!(
            "{rejected_steps} L-steps did not improve the objective and were discarded"
        ));
    }
    let nullity = num_components(&l, None);
    if nullity != k {
        report
            .warnings
            .push(format!("estimated graph has {nullity} components, requested {k}"));
    }
    log::debug!(
        "k-component solve: {} outer, {inner_iterations} inner iterations",
        report.iterations
    );
    Ok((l, report))
}
