//! Reference implementations used as test oracles. None of them call into
//! the library's solvers or spectral routines.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pairs `(i, j)`, `i < j`, in row-major order.
pub fn pair_list(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect()
}

/// Laplacian built entry by entry from pair weights.
pub fn laplacian(p: usize, w: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(p, p);
    for (&(i, j), &v) in pair_list(p).iter().zip(w) {
        l[(i, j)] -= v;
        l[(j, i)] -= v;
        l[(i, i)] += v;
        l[(j, j)] += v;
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Moore–Penrose inverse of a connected graph Laplacian: `(L + J)^-1 - J`
/// with `J = 11ᵀ/p`.
pub fn laplacian_pinv(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let j = DMatrix::from_element(p, p, 1.0 / p as f64);
    (l + &j).try_inverse().expect("connected graph") - j
}

/// Connected components of the graph with the given edges, by union-find.
pub fn union_find_components(p: usize, edges: &[(usize, usize)]) -> usize {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..p).collect();
    let mut count = p;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            count -= 1;
        }
    }
    count
}

/// `f(w) = lin·w - log det(L(w) + 11ᵀ/p)` with gradient and Hessian.
struct GaussianObjective {
    p: usize,
    lin: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl GaussianObjective {
    fn value(&self, w: &[f64]) -> Option<f64> {
        let p = self.p;
        let m = laplacian(p, w).add_scalar(1.0 / p as f64);
        let chol = m.cholesky()?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(self.lin.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - logdet)
    }

    /// Gradient and Hessian: `∂f/∂w_e = lin_e - a_eᵀ M a_e` and
    /// `∂²f/∂w_e∂w_f = (a_eᵀ M a_f)²` with `M = (L + J)^-1`, `a_e = e_i - e_j`.
    fn derivatives(&self, w: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let p = self.p;
        let m = laplacian(p, w)
            .add_scalar(1.0 / p as f64)
            .try_inverse()
            .expect("interior point");
        let quad = |(i, j): (usize, usize), (k, l): (usize, usize)| m[(i, k)] - m[(i, l)] - m[(j, k)] + m[(j, l)];
        let n = self.pairs.len();
        let grad = (0..n)
            .map(|e| self.lin[e] - quad(self.pairs[e], self.pairs[e]))
            .collect();
        let hess = DMatrix::from_fn(n, n, |e, f| quad(self.pairs[e], self.pairs[f]).powi(2));
        (grad, hess)
    }
}

/// Log-barrier interior-point minimizer of `lin·w - log det(L(w) + J)` over
/// `w = w0 + N t >= 0`, by damped Newton steps in `t`.
///
/// `N = None` means the full orthant (`w0` only seeds the starting point).
/// Each barrier stage is solved to a Newton decrement below `tol`, and the
/// barrier weight shrinks until the duality gap bound `m * mu` is below `tol`.
pub struct BarrierOracle {
    pub p: usize,
    pub lin: Vec<f64>,
    pub null_space: Option<DMatrix<f64>>,
    pub tol: f64,
}

impl BarrierOracle {
    pub fn objective(&self, w: &[f64]) -> Option<f64> {
        GaussianObjective {
            p: self.p,
            lin: self.lin.clone(),
            pairs: pair_list(self.p),
        }
        .value(w)
    }

    fn solve_from(&self, start: &[f64]) -> (f64, Vec<f64>) {
        let obj = GaussianObjective {
            p: self.p,
            lin: self.lin.clone(),
            pairs: pair_list(self.p),
        };
        let m = start.len();
        let basis = self.null_space.clone().unwrap_or_else(|| DMatrix::identity(m, m));
        let mut w = start.to_vec();
        let barrier = |w: &[f64], mu: f64| -> Option<f64> {
            if w.iter().any(|v| *v <= 0.0) {
                return None;
            }
            Some(obj.value(w)? - mu * w.iter().map(|v| v.ln()).sum::<f64>())
        };
        let mut mu = 1.0;
        loop {
            for _ in 0..200 {
                let (g, h) = obj.derivatives(&w);
                let gb: Vec<f64> = (0..m).map(|e| g[e] - mu / w[e]).collect();
                let hb = DMatrix::from_fn(m, m, |e, f| h[(e, f)] + if e == f { mu / (w[e] * w[e]) } else { 0.0 });
                let gt = basis.transpose() * nalgebra::DVector::from_vec(gb);
                let ht = basis.transpose() * &hb * &basis;
                let step = ht
                    .cholesky()
                    .expect("barrier Hessian is positive definite")
                    .solve(&(-&gt));
                let decrement = -gt.dot(&step);
                if decrement / 2.0 <= self.tol {
                    break;
                }
                let dw = &basis * &step;
                let f0 = barrier(&w, mu).expect("interior");
                let mut s = 1.0;
                loop {
                    let cand: Vec<f64> = (0..m).map(|e| w[e] + s * dw[e]).collect();
                    if let Some(f1) = barrier(&cand, mu) {
                        if f1 <= f0 - 0.25 * s * decrement {
                            w = cand;
                            break;
                        }
                    }
                    s *= 0.5;
                    if s < 1e-20 {
                        break;
                    }
                }
                if s < 1e-20 {
                    break;
                }
            }
            if (m as f64) * mu <= self.tol {
                break;
            }
            mu *= 0.1;
        }
        (obj.value(&w).expect("interior"), w)
    }

    /// Best of `restarts` runs from random strictly feasible points.
    pub fn solve(&self, restarts: usize, seed: u64) -> (f64, Vec<f64>) {
        let m = self.p * (self.p - 1) / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let center = match &self.null_space {
            // Degree-constrained: uniform 1/(p-1) has unit degrees.
            Some(_) => vec![1.0 / (self.p as f64 - 1.0); m],
            None => vec![1.0; m],
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..restarts {
            let start: Vec<f64> = match &self.null_space {
                None => (0..m).map(|_| rng.random_range(0.05..2.0)).collect(),
                Some(n) => loop {
                    let t = nalgebra::DVector::from_fn(n.ncols(), |_, _| rng.random_range(-0.1..0.1));
                    let w: Vec<f64> = (n * t).iter().zip(&center).map(|(d, c)| c + d).collect();
                    if w.iter().all(|v| *v > 0.01) {
                        break w;
                    }
                },
            };
            let (f, w) = self.solve_from(&start);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, w));
            }
        }
        best.expect("at least one restart")
    }
}

/// Degree-preserving directions for `p = 4`: differences of the three
/// perfect matchings of K4 (each matching adds one to every degree).
pub fn k4_degree_null_space() -> DMatrix<f64> {
    // Pair order: 01 02 03 12 13 23.
    let m1 = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0]; // 01, 23
    let m2 = [0.0, 1.0, 0.0, 0.0, 1.0, 0.0]; // 02, 13
    let m3 = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0]; // 03, 12
    DMatrix::from_fn(6, 2, |e, c| m1[e] - if c == 0 { m2[e] } else { m3[e] })
}

/// `c_e = K_ii + K_jj - 2 K_ij` for each pair.
pub fn pair_costs(k: &DMatrix<f64>) -> Vec<f64> {
    pair_list(k.nrows())
        .into_iter()
        .map(|(i, j)| k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)])
        .collect()
}
