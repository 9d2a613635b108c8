//! Unit-degree Laplacian subproblem:
//! minimize `tr(LK) - log gdet(L)` over Laplacians with `diag(L) = 1`.
//!
//! Solved in weight space by an augmented-Lagrangian loop on the degree
//! equalities, each inner problem by projected gradient, followed by a
//! symmetric diagonal rescaling that restores exact unit degrees.

use nalgebra::DMatrix;

use super::objective::{adjoint, constant_projector, neg_log_det, to_laplacian, DegreePenalty, GmrfObjective};
use super::spg::{minimize_nonneg, SpgOptions};
use super::{check_similarity, ConstraintResiduals, SolveReport, SolverConfig, DEGREE_TOL};
use crate::error::{GraphError, Result};
use crate::graphcore::{degrees, num_pairs, pairs, LaplacianMatrix};

/// `tr(LK) - log det(L + 11ᵀ/p)`, or `None` for a disconnected `L`.
pub fn subproblem_objective(k: &DMatrix<f64>, l: &LaplacianMatrix) -> Option<f64> {
    let p = l.p();
    let w = l.weights();
    let lin: f64 = adjoint(k).iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
    Some(lin + neg_log_det(p, w.as_slice(), &constant_projector(p), 1.0, None)?)
}

/// Solves the unit-degree subproblem for an effective similarity `K`.
pub fn solve_l_subproblem(k: &DMatrix<f64>, cfg: &SolverConfig) -> Result<(LaplacianMatrix, SolveReport)> {
    check_similarity(k)?;
    let p = k.nrows();
    let mut cfg = cfg.clone();
    cfg.k = 1;
    cfg.validate(p)?;
    let sol = solve_unit_degree(k, &constant_projector(p), None, None, &cfg)?;
    Ok(sol.into_parts())
}

pub(crate) struct UnitDegreeSolution {
    pub p: usize,
    pub w: Vec<f64>,
    pub report: SolveReport,
    /// Final multipliers and penalty, reusable as a warm start.
    pub dual: DegreePenalty,
}

impl UnitDegreeSolution {
    pub fn laplacian(&self) -> LaplacianMatrix {
        to_laplacian(self.p, &self.w)
    }

    fn into_parts(self) -> (LaplacianMatrix, SolveReport) {
        (self.laplacian(), self.report)
    }
}

const AL_TARGET: f64 = 1e-9;
const AL_MAX_ROUNDS: usize = 200;
const RHO_MAX: f64 = 1e8;

/// `lin · w - log det(L(w) + shift)` under `w >= 0`, `A w = 1`.
///
/// `warm` must be in the domain (`L(warm) + shift` positive definite);
/// otherwise uniform weights `1/(p-1)` are used.
pub(crate) fn solve_unit_degree(
    k: &DMatrix<f64>,
    shift: &DMatrix<f64>,
    warm: Option<&[f64]>,
    warm_dual: Option<&DegreePenalty>,
    cfg: &SolverConfig,
) -> Result<UnitDegreeSolution> {
    let p = k.nrows();
    let lin = adjoint(k);
    let uniform = vec![1.0 / (p as f64 - 1.0); num_pairs(p)];
    let mut w = match warm {
        Some(w0) if neg_log_det(p, w0, shift, 1.0, None).is_some() => w0.to_vec(),
        _ => uniform,
    };
    if neg_log_det(p, &w, shift, 1.0, None).is_none() {
        return Err(GraphError::invalid("subproblem start is outside the objective domain"));
    }

    let opts = SpgOptions {
        max_iters: cfg.max_inner_iters,
        tol: cfg.inner_tol,
        ..Default::default()
    };
    let mut penalty = match warm_dual {
        Some(d) if d.multipliers.len() == p => d.clone(),
        _ => DegreePenalty {
            multipliers: vec![0.0; p],
            rho: 1.0,
        },
    };
    let mut prev_res = f64::INFINITY;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut inner_ok = false;
    let mut rounds = 0;

    while rounds < AL_MAX_ROUNDS {
        rounds += 1;
        let objective = GmrfObjective {
            p,
            lin: &lin,
            shift,
            degree: Some(penalty.clone()),
        };
        let Some(out) = minimize_nonneg(&objective, &w, opts) else {
            break;
        };
        iterations += out.iterations;
        inner_ok = out.settled(cfg.inner_tol);
        kkt = out.pg_norm;
        w = out.x;
        let d = degrees(p, &w);
        let mut res = 0.0_f64;
        for (y, di) in penalty.multipliers.iter_mut().zip(&d) {
            let r = di - 1.0;
            *y += penalty.rho * r;
            res = res.max(r.abs());
        }
        if res <= AL_TARGET && inner_ok {
            break;
        }
        if inner_ok && res > 0.25 * prev_res {
            penalty.rho = (penalty.rho * 10.0).min(RHO_MAX);
        }
        prev_res = res;
    }

    if let Some(polished) = balance_degrees(p, &w) {
        if neg_log_det(p, &polished, shift, 1.0, None).is_some() {
            w = polished;
        }
    }

    let value = lin.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        + neg_log_det(p, &w, shift, 1.0, None).unwrap_or(f64::INFINITY);
    let l = to_laplacian(p, &w);
    let residuals = ConstraintResiduals::of(&l, true);
    let degree_ok = residuals.degree.is_some_and(|d| d <= DEGREE_TOL);
    let mut report = SolveReport {
        iterations,
        objective_trace: vec![value],
        residuals,
        kkt_residual: kkt,
        converged: inner_ok && degree_ok,
        warnings: Vec::new(),
    };
    if !report.converged {
        report.warnings.push(format!(
            "unit-degree subproblem stopped after {rounds} rounds: KKT residual {kkt:.3e}, degree residual {:.3e}",
            residuals.degree.unwrap_or(f64::NAN)
        ));
    }
    Ok(UnitDegreeSolution {
        p,
        w,
        report,
        dual: penalty,
    })
}

/// Symmetric diagonal scaling `w_ij / sqrt(d_i d_j)` iterated to unit degrees.
/// Keeps the support and nonnegativity of `w`.
fn balance_degrees(p: usize, w: &[f64]) -> Option<Vec<f64>> {
    let mut w = w.to_vec();
    let mut best = f64::INFINITY;
    let mut best_w = w.clone();
    for _ in 0..1000 {
        let d = degrees(p, &w);
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let res = d.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        if res >= best {
            break;
        }
        best = res;
        best_w.copy_from_slice(&w);
        if res <= 4.0 * f64::EPSILON {
            break;
        }
        let s: Vec<f64> = d.iter().map(|v| v.sqrt().recip()).collect();
        for (v, (i, j)) in w.iter_mut().zip(pairs(p)) {
            *v *= s[i] * s[j];
        }
    }
    (best <= DEGREE_TOL).then_some(best_w)
}
