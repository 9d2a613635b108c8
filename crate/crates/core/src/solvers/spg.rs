//! Projected gradient over the nonnegative orthant with Barzilai-Borwein
//! steps and a nonmonotone Armijo backtracking line search.

/// A smooth objective with a (possibly restricted) open domain.
pub(crate) trait Objective {
    /// Value at `x`, or `None` outside the domain.
    fn value(&self, x: &[f64]) -> Option<f64>;
    /// Value and gradient at `x`, or `None` outside the domain.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Option<f64>;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SpgOptions {
    pub max_iters: usize,
    /// Stop when `||P(x - g) - x||_2 <= tol`.
    pub tol: f64,
    /// Nonmonotone memory; 1 is the classical monotone Armijo rule.
    pub memory: usize,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            tol: 1e-7,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SpgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Projected-gradient norm at `x`.
    pub pg_norm: f64,
    pub converged: bool,
    /// Stopped because the objective no longer decreases in floating point.
    pub stalled: bool,
}

const STEP_MIN: f64 = 1e-12;
const STEP_MAX: f64 = 1e12;
const ARMIJO: f64 = 1e-4;
/// Iterations without a representable decrease before giving up.
const STALL_ITERS: usize = 200;

/// A stalled run within this factor of the tolerance counts as converged:
/// the projected gradient is at the floating-point floor of the objective.
const STALL_SLACK: f64 = 100.0;

impl SpgOutcome {
    /// Converged, or stalled at the floating-point floor close to `tol`.
    pub fn settled(&self, tol: f64) -> bool {
        self.converged || (self.stalled && self.pg_norm <= STALL_SLACK * tol)
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let d = (xi - gi).max(0.0) - xi;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` over `x >= 0` from a feasible start inside the domain.
///
/// Returns `None` when the start is outside the domain of `f`.
pub(crate) fn minimize_nonneg<F: Objective>(f: &F, x0: &[f64], opts: SpgOptions) -> Option<SpgOutcome> {
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let mut g = vec![0.0; n];
    let mut fx = f.value_grad(&x, &mut g)?;

    let mut history = std::collections::VecDeque::with_capacity(opts.memory.max(1));
    history.push_back(fx);

    let mut pg = projected_gradient_norm(&x, &g);
    let ginf = x
        .iter()
        .zip(&g)
        .map(|(&xi, &gi)| ((xi - gi).max(0.0) - xi).abs())
        .fold(0.0, f64::max);
    let mut step = if ginf > 0.0 {
        (1.0 / ginf).clamp(STEP_MIN, STEP_MAX)
    } else {
        1.0
    };

    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut iterations = 0;
    let mut best = fx;
    let mut since_best = 0;
    let mut stalled = false;

    while pg > opts.tol && iterations < opts.max_iters {
        iterations += 1;
        for i in 0..n {
            dir[i] = (x[i] - step * g[i]).max(0.0) - x[i];
        }
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if slope >= 0.0 {
            // No descent available at this step length; reset the step.
            step = 1.0;
            continue;
        }
        let f_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = (x[i] + lambda * dir[i]).max(0.0);
            }
            if let Some(ft) = f.value(&trial) {
                if ft <= f_ref + ARMIJO * lambda * slope {
                    accepted = Some(ft);
                    break;
                }
                // Safeguarded quadratic interpolation.
                let denom = 2.0 * (ft - fx - lambda * slope);
                let lt = if denom > 0.0 {
                    -slope * lambda * lambda / denom
                } else {
                    0.5 * lambda
                };
                lambda = lt.clamp(0.1 * lambda, 0.5 * lambda);
            } else {
                lambda *= 0.25;
            }
        }
        let Some(_) = accepted else {
            break;
        };
        let Some(f_new) = f.value_grad(&trial, &mut g_new) else {
            break;
        };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = g_new[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        step = if sy > 0.0 {
            (ss / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX.min(step * 10.0)
        };
        if history.len() == opts.memory.max(1) {
            history.pop_front();
        }
        history.push_back(fx);
        pg = projected_gradient_norm(&x, &g);
        if fx < best - 8.0 * f64::EPSILON * best.abs().max(1.0) {
            best = fx;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_ITERS {
                stalled = pg > opts.tol;
                break;
            }
        }
    }

    Some(SpgOutcome {
        x,
        value: fx,
        iterations,
        pg_norm: pg,
        converged: pg <= opts.tol,
        stalled,
    })
}
