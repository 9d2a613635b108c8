use nalgebra::DMatrix;

use super::spg::{minimize_nonneg, Objective, SpgOptions};
use super::{ConstraintResiduals, SolveReport, SolverConfig};
use crate::error::{GraphError, Result};
use crate::graphcore::{degrees, num_pairs, pairs, GraphWeights};

/// `(1/2) tr(WZ) - alpha 1ᵀ log(W1) + (gamma/2) ||W||_F^2` in weight space.
struct SmoothObjective {
    p: usize,
    z: Vec<f64>,
    alpha: f64,
    gamma: f64,
}

impl SmoothObjective {
    fn eval(&self, w: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
        let d = degrees(self.p, w);
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let mut value = 0.0;
        for ((zi, wi), _) in self.z.iter().zip(w).zip(pairs(self.p)) {
            value += zi * wi + self.gamma * wi * wi;
        }
        value -= self.alpha * d.iter().map(|v| v.ln()).sum::<f64>();
        if let Some(grad) = grad {
            for (m, (i, j)) in pairs(self.p).enumerate() {
                grad[m] = self.z[m] + 2.0 * self.gamma * w[m] - self.alpha * (1.0 / d[i] + 1.0 / d[j]);
            }
        }
        Some(value)
    }
}

impl Objective for SmoothObjective {
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.eval(x, None)
    }
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self.eval(x, Some(grad))
    }
}

/// Objective value for weights `w` on distances `z`; `None` if a degree is zero.
pub fn smooth_objective(z: &DMatrix<f64>, w: &GraphWeights, alpha: f64, gamma: f64) -> Option<f64> {
    let p = z.nrows();
    let obj = SmoothObjective {
        p,
        z: pairs(p).map(|(i, j)| z[(i, j)]).collect(),
        alpha,
        gamma,
    };
    obj.value(w.as_slice())
}

/// Smooth-signal graph from a squared-distance matrix `Z`.
///
/// Requires `cfg.alpha > 0` (log-degree barrier) and `cfg.gamma > 0`.
pub fn learn_smooth_graph(z: &DMatrix<f64>, cfg: &SolverConfig) -> Result<(GraphWeights, SolveReport)> {
    let p = z.nrows();
    if z.ncols() != p || p < 2 {
        return Err(GraphError::invalid("distance matrix must be square with p >= 2"));
    }
    if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(GraphError::invalid(
            "distance matrix entries must be finite and nonnegative",
        ));
    }
    for i in 0..p {
        if z[(i, i)] != 0.0 {
            return Err(GraphError::invalid(format!(
                "distance matrix diagonal entry {i} is nonzero"
            )));
        }
        for j in i + 1..p {
            if (z[(i, j)] - z[(j, i)]).abs() > 1e-12 * z.amax().max(1.0) {
                return Err(GraphError::invalid(format!(
                    "distance matrix is not symmetric at ({i},{j})"
                )));
            }
        }
    }
    if !(cfg.alpha > 0.0) || !(cfg.gamma > 0.0) {
        return Err(GraphError::invalid(format!(
            "smooth formulation needs alpha > 0 and gamma > 0, got alpha = {}, gamma = {}",
            cfg.alpha, cfg.gamma
        )));
    }
    let obj = SmoothObjective {
        p,
        z: pairs(p).map(|(i, j)| z[(i, j)]).collect(),
        alpha: cfg.alpha,
        gamma: cfg.gamma,
    };
    let w0 = vec![1.0; num_pairs(p)];
    let out = minimize_nonneg(
        &obj,
        &w0,
        SpgOptions {
            max_iters: cfg.max_inner_iters,
            tol: cfg.inner_tol,
            ..Default::default()
        },
    )
    .ok_or_else(|| GraphError::invalid("initial point outside the objective domain"))?;
    let settled = out.settled(cfg.inner_tol);
    let w = GraphWeights::from_vec_unchecked(p, out.x);
    let mut report = SolveReport {
        iterations: out.iterations,
        objective_trace: vec![out.value],
        residuals: ConstraintResiduals::of(&w.laplacian(), false),
        kkt_residual: out.pg_norm,
        converged: settled,
        warnings: Vec::new(),
    };
    if !settled {
        report
            .warnings
            .push(format!("projected gradient stopped at residual {:.3e}", out.pg_norm));
    }
    Ok((w, report))
}
