//! Weight-space building blocks of the GMRF objectives.

use nalgebra::DMatrix;

use super::spg::Objective;
use crate::graphcore::{pairs, GraphWeights, LaplacianMatrix};

/// Adjoint of the Laplacian operator: `tr(K L(w)) = adjoint(K) · w`.
pub(crate) fn adjoint(k: &DMatrix<f64>) -> Vec<f64> {
    let p = k.nrows();
    pairs(p)
        .map(|(i, j)| k[(i, i)] + k[(j, j)] - k[(i, j)] - k[(j, i)])
        .collect()
}

pub(crate) fn dense_laplacian(p: usize, w: &[f64]) -> DMatrix<f64> {
    GraphWeights::from_vec_unchecked(p, w.to_vec())
        .laplacian()
        .into_matrix()
}

pub(crate) fn to_laplacian(p: usize, w: &[f64]) -> LaplacianMatrix {
    GraphWeights::from_vec_unchecked(p, w.iter().map(|v| v.max(0.0)).collect()).laplacian()
}

/// Constant-vector projector `11ᵀ/p`.
pub(crate) fn constant_projector(p: usize) -> DMatrix<f64> {
    DMatrix::from_element(p, p, 1.0 / p as f64)
}

/// `log det(L(w) + shift)` and, optionally, `scale` times its gradient
/// subtracted into `grad` (i.e. the gradient of `-scale * log det`).
pub(crate) fn neg_log_det(
    p: usize,
    w: &[f64],
    shift: &DMatrix<f64>,
    scale: f64,
    grad: Option<&mut [f64]>,
) -> Option<f64> {
    let m = dense_laplacian(p, w) + shift;
    let chol = m.cholesky()?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    if let Some(grad) = grad {
        let inv = chol.inverse();
        for (g, (i, j)) in grad.iter_mut().zip(pairs(p)) {
            *g -= scale * (inv[(i, i)] + inv[(j, j)] - 2.0 * inv[(i, j)]);
        }
    }
    Some(-scale * logdet)
}

/// Augmented-Lagrangian terms for the unit-degree constraint `A w = 1`.
#[derive(Debug, Clone)]
pub(crate) struct DegreePenalty {
    pub multipliers: Vec<f64>,
    pub rho: f64,
}

/// `lin · w - log det(L(w) + shift) [+ y'(Aw - 1) + rho/2 ||Aw - 1||²]`.
pub(crate) struct GmrfObjective<'a> {
    pub p: usize,
    pub lin: &'a [f64],
    pub shift: &'a DMatrix<f64>,
    pub degree: Option<DegreePenalty>,
}

impl GmrfObjective<'_> {
    fn eval(&self, w: &[f64], grad: Option<&mut [f64]>) -> Option<f64> {
        let linear: f64 = self.lin.iter().zip(w).map(|(c, x)| c * x).sum();
        match grad {
            None => {
                let mut v = linear + neg_log_det(self.p, w, self.shift, 1.0, None)?;
                if let Some(dp) = &self.degree {
                    v += degree_penalty(self.p, w, dp, None);
                }
                Some(v)
            }
            Some(grad) => {
                grad.copy_from_slice(self.lin);
                let mut v = linear + neg_log_det(self.p, w, self.shift, 1.0, Some(grad))?;
                if let Some(dp) = &self.degree {
                    v += degree_penalty(self.p, w, dp, Some(grad));
                }
                Some(v)
            }
        }
    }
}

fn degree_penalty(p: usize, w: &[f64], dp: &DegreePenalty, grad: Option<&mut [f64]>) -> f64 {
    let d = crate::graphcore::degrees(p, w);
    let r: Vec<f64> = d.iter().map(|v| v - 1.0).collect();
    let value = r
        .iter()
        .zip(&dp.multipliers)
        .map(|(ri, yi)| yi * ri + 0.5 * dp.rho * ri * ri)
        .sum();
    if let Some(grad) = grad {
        let u: Vec<f64> = r.iter().zip(&dp.multipliers).map(|(ri, yi)| yi + dp.rho * ri).collect();
        for (g, (i, j)) in grad.iter_mut().zip(pairs(p)) {
            *g += u[i] + u[j];
        }
    }
    value
}

impl Objective for GmrfObjective<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        self.eval(x, None)
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self.eval(x, Some(grad))
    }
}

/// `||L(a) - L(b)||_F^2` and its gradient with respect to `a`, computed in
/// weight space: `2 ||Δ||² + ||A Δ||²`.
pub(crate) fn laplacian_distance(p: usize, a: &[f64], b: &[f64], scale: f64, grad: Option<&mut [f64]>) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let dd = crate::graphcore::degrees(p, &diff);
    let value = 2.0 * diff.iter().map(|v| v * v).sum::<f64>() + dd.iter().map(|v| v * v).sum::<f64>();
    if let Some(grad) = grad {
        for ((g, (i, j)), dv) in grad.iter_mut().zip(pairs(p)).zip(&diff) {
            *g += scale * (4.0 * dv + 2.0 * (dd[i] + dd[j]));
        }
    }
    scale * value
}
