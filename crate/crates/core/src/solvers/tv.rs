//! Causal time-varying Laplacian estimation.
//!
//! At step `t` the estimator jointly solves, over the last
//! `B = min(memory, t)` windows,
//!
//! ```text
//! sum_b n_b [tr(S_b L_b) - log gdet(L_b) + alpha ||L_b||_off] + delta sum_b ||L_b - L_{b-1}||_F^2
//! ```
//!
//! where the first link anchors to the stored estimate preceding the
//! history (when one exists), and keeps only the newest `L_t`. With
//! `memory >= T` every step re-solves the full joint problem over all past
//! windows. Nothing at step `t` reads windows after `t`.

use super::objective::{adjoint, constant_projector, laplacian_distance, neg_log_det, to_laplacian};
use super::spg::{minimize_nonneg, Objective, SpgOptions};
use super::{check_similarity, ConstraintResiduals, SolveReport, SolverConfig};
use crate::error::{GraphError, Result};
use crate::graphcore::{num_components, num_pairs, LaplacianMatrix};
use crate::preprocess::SimilarityMatrix;

use nalgebra::DMatrix;

/// One causal estimate per window plus the solve report of each step.
#[derive(Debug, Clone)]
pub struct TimeVaryingFit {
    pub laplacians: Vec<LaplacianMatrix>,
    pub reports: Vec<SolveReport>,
}

impl TimeVaryingFit {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

struct JointObjective<'a> {
    p: usize,
    m: usize,
    lins: Vec<Vec<f64>>,
    counts: Vec<f64>,
    shift: &'a DMatrix<f64>,
    delta: f64,
    anchor: Option<&'a [f64]>,
}

impl JointObjective<'_> {
    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> Option<f64> {
        let (p, m) = (self.p, self.m);
        let mut value = 0.0;
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        for (b, (lin, &n)) in self.lins.iter().zip(&self.counts).enumerate() {
            let w = &x[b * m..(b + 1) * m];
            value += n * lin.iter().zip(w).map(|(c, v)| c * v).sum::<f64>();
            let gb = grad.as_deref_mut().map(|g| &mut g[b * m..(b + 1) * m]);
            if let Some(gb) = gb {
                for (gi, c) in gb.iter_mut().zip(lin) {
                    *gi += n * c;
                }
                value += neg_log_det(p, w, self.shift, n, Some(gb))?;
            } else {
                value += neg_log_det(p, w, self.shift, n, None)?;
            }
        }
        if self.delta > 0.0 {
            let blocks = self.lins.len();
            if let Some(anchor) = self.anchor {
                let w0 = &x[..m];
                let g0 = grad.as_deref_mut().map(|g| &mut g[..m]);
                value += laplacian_distance(p, w0, anchor, self.delta, g0);
            }
            for b in 1..blocks {
                let (prev, cur) = (&x[(b - 1) * m..b * m], &x[b * m..(b + 1) * m]);
                match grad.as_deref_mut() {
                    Some(g) => {
                        value += laplacian_distance(p, cur, prev, self.delta, Some(&mut g[b * m..(b + 1) * m]));
                        laplacian_distance(p, prev, cur, self.delta, Some(&mut g[(b - 1) * m..b * m]));
                    }
                    None => value += laplacian_distance(p, cur, prev, self.delta, None),
                }
            }
        }
        Some(value)
    }
}

impl Objective for JointObjective<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self.eval(x, Some(grad))
    }
}

/// Causal estimates `L̂_{t|t}` for a sequence of similarity matrices with
/// window sample counts `counts`.
pub fn learn_time_varying(s_seq: &[SimilarityMatrix], counts: &[usize], cfg: &SolverConfig) -> Result<TimeVaryingFit> {
    let Some(first) = s_seq.first() else {
        return Err(GraphError::invalid("empty similarity sequence"));
    };
    if counts.len() != s_seq.len() {
        return Err(GraphError::DimensionMismatch {
            expected: s_seq.len(),
            actual: counts.len(),
        });
    }
    let p = first.p();
    for s in s_seq {
        if s.p() != p {
            return Err(GraphError::DimensionMismatch {
                expected: p,
                actual: s.p(),
            });
        }
        check_similarity(&s.entries)?;
    }
    if let Some(t) = counts.iter().position(|&n| n < 1) {
        return Err(GraphError::invalid(format!("window {t} has no observations")));
    }
    let mut cfg = cfg.clone();
    cfg.k = 1;
    cfg.validate(p)?;

    let m = num_pairs(p);
    let shift = constant_projector(p);
    let lins: Vec<Vec<f64>> = s_seq
        .iter()
        .map(|s| adjoint(&s.entries).into_iter().map(|c| c + 2.0 * cfg.alpha).collect())
        .collect();
    let uniform = vec![1.0 / (p as f64 - 1.0); m];
    let opts = SpgOptions {
        max_iters: cfg.max_inner_iters,
        tol: cfg.inner_tol,
        ..Default::default()
    };

    let mut estimates: Vec<Vec<f64>> = Vec::with_capacity(s_seq.len());
    let mut laplacians = Vec::with_capacity(s_seq.len());
    let mut reports = Vec::with_capacity(s_seq.len());

    for t in 0..s_seq.len() {
        let blocks = cfg.memory.min(t + 1);
        let start = t + 1 - blocks;
        let anchor = (start > 0).then(|| estimates[start - 1].as_slice());
        let objective = JointObjective {
            p,
            m,
            lins: lins[start..=t].to_vec(),
            counts: counts[start..=t].iter().map(|&n| n as f64).collect(),
            shift: &shift,
            delta: cfg.delta,
            anchor,
        };
        let mut x0 = Vec::with_capacity(blocks * m);
        for s in start..=t {
            let warm = if s < t {
                &estimates[s]
            } else if t > 0 {
                &estimates[t - 1]
            } else {
                &uniform
            };
            x0.extend_from_slice(warm);
        }
        let out = minimize_nonneg(&objective, &x0, opts)
            .ok_or_else(|| GraphError::invalid(format!("step {t}: start outside the objective domain")))?;

        let w_t = out.x[(blocks - 1) * m..].to_vec();
        let l = to_laplacian(p, &w_t);
        let mut report = SolveReport {
            iterations: out.iterations,
            objective_trace: vec![out.value],
            residuals: ConstraintResiduals::of(&l, false),
            kkt_residual: out.pg_norm,
            converged: out.settled(cfg.inner_tol),
            warnings: Vec::new(),
        };
        if !out.settled(cfg.inner_tol) {
            report.warnings.push(format!(
                "step {t}: projected gradient stopped at residual {:.3e}",
                out.pg_norm
            ));
        }
        if num_components(&l, None) > 1 {
            report
                .warnings
                .push(format!("step {t}: estimated graph is disconnected"));
        }
        estimates.push(w_t);
        laplacians.push(l);
        reports.push(report);
    }
    Ok(TimeVaryingFit { laplacians, reports })
}
