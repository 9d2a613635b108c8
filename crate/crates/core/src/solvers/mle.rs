use super::objective::{adjoint, constant_projector, to_laplacian, GmrfObjective};
use super::spg::{minimize_nonneg, SpgOptions};
use super::{check_similarity, ConstraintResiduals, SolveReport, SolverConfig};
use crate::error::{GraphError, Result};
use crate::graphcore::{log_det_shifted, num_components, num_pairs, LaplacianMatrix};
use crate::preprocess::SimilarityMatrix;

/// `tr(LS) - log det(L + 11ᵀ/p) + alpha * sum_{i != j} |L_ij|`, or `None`
/// for a disconnected `L`.
pub fn mle_objective(s: &SimilarityMatrix, l: &LaplacianMatrix, alpha: f64) -> Option<f64> {
    let tr = (l.matrix() * &s.entries).trace();
    let off: f64 = 2.0 * l.weights().as_slice().iter().sum::<f64>();
    Some(tr - log_det_shifted(l)? + alpha * off)
}

/// Laplacian-constrained maximum-likelihood estimate with an optional l1
/// penalty on off-diagonal magnitudes (`cfg.alpha`).
pub fn learn_connected_mle(s: &SimilarityMatrix, cfg: &SolverConfig) -> Result<(LaplacianMatrix, SolveReport)> {
    check_similarity(&s.entries)?;
    let p = s.p();
    let mut cfg = cfg.clone();
    cfg.k = 1;
    cfg.validate(p)?;

    let lin: Vec<f64> = adjoint(&s.entries).into_iter().map(|c| c + 2.0 * cfg.alpha).collect();
    let shift = constant_projector(p);
    let objective = GmrfObjective {
        p,
        lin: &lin,
        shift: &shift,
        degree: None,
    };
    let w0 = vec![1.0 / (p as f64 - 1.0); num_pairs(p)];
    let out = minimize_nonneg(
        &objective,
        &w0,
        SpgOptions {
            max_iters: cfg.max_inner_iters,
            tol: cfg.inner_tol,
            ..Default::default()
        },
    )
    .ok_or_else(|| GraphError::invalid("initial point outside the objective domain"))?;

    let l = to_laplacian(p, &out.x);
    let mut report = SolveReport {
        iterations: out.iterations,
        objective_trace: vec![out.value],
        residuals: ConstraintResiduals::of(&l, false),
        kkt_residual: out.pg_norm,
        converged: out.settled(cfg.inner_tol),
        warnings: Vec::new(),
    };
    if !out.settled(cfg.inner_tol) {
        report
            .warnings
            .push(format!("projected gradient stopped at residual {:.3e}", out.pg_norm));
    }
    let nullity = num_components(&l, None);
    if nullity > 1 {
        report
            .warnings
            .push(format!("estimated graph is disconnected ({nullity} components)"));
    }
    Ok((l, report))
}
