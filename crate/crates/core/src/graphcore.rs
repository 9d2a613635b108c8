//! Laplacian and edge-weight algebra, spectral utilities and the
//! pseudo-determinant shared by every solver.
//!
//! Edge weights of a graph on `p` nodes are stored as a vector of length
//! `p(p-1)/2` in row-major pair order: `(0,1), (0,2), ..., (0,p-1), (1,2), ...`.
//! Every module in the crate uses this ordering.

use nalgebra::{DMatrix, DVector};

use crate::error::{GraphError, Result};

/// Tolerance used when validating user-supplied Laplacians.
pub const VALIDATION_TOL: f64 = 1e-6;

/// Positive off-diagonal entries up to this size are treated as round-off.
pub const SIGN_CLAMP_TOL: f64 = 1e-12;

/// Number of unordered node pairs.
#[inline]
pub fn num_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Position of the pair `(i, j)`, `i < j`, in the weight vector.
#[inline]
pub fn pair_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// Iterates over `(i, j)` pairs in weight-vector order.
pub fn pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
}

/// Recovers the node count from a weight-vector length.
pub fn nodes_for_pairs(m: usize) -> Option<usize> {
    let p = ((1.0 + (1.0 + 8.0 * m as f64).sqrt()) / 2.0).round() as usize;
    (num_pairs(p) == m).then_some(p)
}

/// Nonnegative edge weights of an undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphWeights {
    p: usize,
    w: Vec<f64>,
}

impl GraphWeights {
    pub fn new(p: usize, w: Vec<f64>) -> Result<Self> {
        if p < 2 {
            return Err(GraphError::invalid(format!("node count must be >= 2, got {p}")));
        }
        if w.len() != num_pairs(p) {
            return Err(GraphError::DimensionMismatch {
                expected: num_pairs(p),
                actual: w.len(),
            });
        }
        if let Some((m, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(GraphError::invalid(format!(
                "edge weight {m} must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Self { p, w })
    }

    /// Builds weights without validation. Callers guarantee the invariants.
    pub(crate) fn from_vec_unchecked(p: usize, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), num_pairs(p));
        Self { p, w }
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            p,
            w: vec![0.0; num_pairs(p)],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// Weight of edge `(i, j)` in either orientation; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.w[pair_index(self.p, i, j)],
            std::cmp::Ordering::Greater => self.w[pair_index(self.p, j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }

    pub fn degrees(&self) -> Vec<f64> {
        degrees(self.p, &self.w)
    }

    /// Dense symmetric adjacency matrix `W`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.p, self.p);
        for ((i, j), &v) in pairs(self.p).zip(&self.w) {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }

    pub fn laplacian(&self) -> LaplacianMatrix {
        laplacian_from_weights(self)
    }

    /// Edges with weight strictly above `threshold`.
    pub fn edges_above(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        pairs(self.p)
            .zip(&self.w)
            .filter(|(_, &v)| v > threshold)
            .map(|((i, j), &v)| (i, j, v))
            .collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn degrees(p: usize, w: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; p];
    for ((i, j), &v) in pairs(p).zip(w) {
        d[i] += v;
        d[j] += v;
    }
    d
}

/// Combinatorial graph Laplacian `L = D - W`.
///
/// Instances built from [`GraphWeights`] are exactly symmetric with exactly
/// zero off-diagonal/diagonal balance: the diagonal is the sum of the row's
/// off-diagonal magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    m: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// Validates a dense matrix and rebuilds it from its edge weights.
    pub fn try_from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        Ok(weights_from_laplacian(m)?.laplacian())
    }

    pub fn zeros(p: usize) -> Self {
        Self {
            m: DMatrix::zeros(p, p),
        }
    }

    pub fn p(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn weights(&self) -> GraphWeights {
        let p = self.p();
        let w = pairs(p).map(|(i, j)| (-self.m[(i, j)]).max(0.0)).collect();
        GraphWeights::from_vec_unchecked(p, w)
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.p()).map(|i| self.m[(i, i)]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    /// Measures every Laplacian invariant. Used by tests and solver reports.
    pub fn check(&self) -> InvariantReport {
        let p = self.p();
        let mut symmetry = 0.0_f64;
        let mut sign = 0.0_f64;
        let mut row_sum = 0.0_f64;
        for i in 0..p {
            let mut s = 0.0;
            for j in 0..p {
                s += self.m[(i, j)];
                if i != j {
                    symmetry = symmetry.max((self.m[(i, j)] - self.m[(j, i)]).abs());
                    sign = sign.max(self.m[(i, j)]);
                }
            }
            row_sum = row_sum.max(s.abs());
        }
        let min_eigenvalue = sym_eigen(&self.m).values[0];
        InvariantReport {
            symmetry,
            row_sum,
            max_off_diagonal: sign,
            min_eigenvalue,
        }
    }
}

/// Worst-case violations of the Laplacian invariants.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InvariantReport {
    /// `max |L_ij - L_ji|`
    pub symmetry: f64,
    /// `max_i |sum_j L_ij|`
    pub row_sum: f64,
    /// Largest off-diagonal entry (must be <= 0).
    pub max_off_diagonal: f64,
    pub min_eigenvalue: f64,
}

impl InvariantReport {
    /// Symmetry and sign exact, row sums and PSD within `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.symmetry == 0.0 && self.max_off_diagonal <= 0.0 && self.row_sum <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn laplacian_from_weights(w: &GraphWeights) -> LaplacianMatrix {
    let p = w.p();
    let mut m = DMatrix::zeros(p, p);
    for ((i, j), &v) in pairs(p).zip(w.as_slice()) {
        m[(i, j)] = -v;
        m[(j, i)] = -v;
    }
    for i in 0..p {
        // Summing the row's off-diagonals in a fixed order keeps L1 = 0 exact
        // up to the floating point sum itself.
        let mut d = 0.0;
        for j in 0..p {
            if j != i {
                d -= m[(i, j)];
            }
        }
        m[(i, i)] = d;
    }
    LaplacianMatrix { m }
}

/// Extracts edge weights from a dense Laplacian-like matrix.
///
/// Rejects asymmetry or nonzero row sums beyond [`VALIDATION_TOL`] and
/// positive off-diagonals beyond [`SIGN_CLAMP_TOL`]; smaller positive
/// off-diagonals are clamped to zero weight.
pub fn weights_from_laplacian(m: &DMatrix<f64>) -> Result<GraphWeights> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(GraphError::NotLaplacian(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    if p < 2 {
        return Err(GraphError::NotLaplacian("need at least 2 nodes".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GraphError::NotLaplacian("non-finite entry".into()));
    }
    let scale = m.amax().max(1.0);
    for i in 0..p {
        let row: f64 = (0..p).map(|j| m[(i, j)]).sum();
        if row.abs() > VALIDATION_TOL * scale {
            return Err(GraphError::NotLaplacian(format!("row {i} sums to {row:e}, expected 0")));
        }
        for j in i + 1..p {
            if (m[(i, j)] - m[(j, i)]).abs() > VALIDATION_TOL * scale {
                return Err(GraphError::NotLaplacian(format!(
                    "asymmetric entries at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
            if m[(i, j)] > SIGN_CLAMP_TOL {
                return Err(GraphError::NotLaplacian(format!(
                    "positive off-diagonal {} at ({i},{j})",
                    m[(i, j)]
                )));
            }
        }
    }
    let w = pairs(p)
        .map(|(i, j)| (-0.5 * (m[(i, j)] + m[(j, i)])).max(0.0))
        .collect();
    Ok(GraphWeights::from_vec_unchecked(p, w))
}

/// Eigendecomposition of a symmetric matrix with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

/// The single eigendecomposition routine every spectral operation goes through.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

/// Default zero-eigenvalue tolerance `1e-8 * max(1, lambda_max)`.
pub fn default_zero_tol(largest_eigenvalue: f64) -> f64 {
    1e-8 * largest_eigenvalue.max(1.0)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectralSummary {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub nullity: usize,
    /// Second smallest eigenvalue.
    pub algebraic_connectivity: f64,
    /// Largest eigenvalue.
    pub spectral_radius: f64,
}

/// Spectrum of `L`. `zero_tol = None` selects [`default_zero_tol`].
pub fn spectral_summary(l: &LaplacianMatrix, zero_tol: Option<f64>) -> SpectralSummary {
    let eig = sym_eigen(l.matrix());
    let eigenvalues: Vec<f64> = eig.values.iter().copied().collect();
    let lmax = *eigenvalues.last().unwrap_or(&0.0);
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(lmax));
    let nullity = eigenvalues.iter().filter(|&&v| v <= tol).count();
    SpectralSummary {
        algebraic_connectivity: eigenvalues.get(1).copied().unwrap_or(0.0),
        spectral_radius: lmax,
        nullity,
        eigenvalues,
    }
}

/// Number of connected components, read off as the nullity of `L`.
pub fn num_components(l: &LaplacianMatrix, zero_tol: Option<f64>) -> usize {
    spectral_summary(l, zero_tol).nullity
}

/// Log pseudo-determinant: sum of logs of the eigenvalues above the default
/// zero tolerance.
///
/// Returns [`GraphError::Disconnected`] when the nullity exceeds one; the
/// error carries the value so callers may still use it.
pub fn log_gdet(l: &LaplacianMatrix) -> Result<f64> {
    let s = spectral_summary(l, None);
    let tol = default_zero_tol(s.spectral_radius);
    let value = s.eigenvalues.iter().filter(|&&v| v > tol).map(|v| v.ln()).sum();
    if s.nullity > 1 {
        return Err(GraphError::Disconnected {
            nullity: s.nullity,
            log_pdet: value,
        });
    }
    Ok(value)
}

/// `log det(L + J)` with `J = 11ᵀ/p`, via Cholesky. `None` when `L + J` is
/// not positive definite (disconnected graph).
pub fn log_det_shifted(l: &LaplacianMatrix) -> Option<f64> {
    let p = l.p();
    let shifted = l.matrix().add_scalar(1.0 / p as f64);
    shifted
        .cholesky()
        .map(|c| 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Squared Frobenius distance between two Laplacians.
pub fn time_consistency(a: &LaplacianMatrix, b: &LaplacianMatrix) -> Result<f64> {
    if a.p() != b.p() {
        return Err(GraphError::DimensionMismatch {
            expected: a.p(),
            actual: b.p(),
        });
    }
    Ok((a.matrix() - b.matrix()).norm_squared())
}

/// Connected-component label of each node, over edges with weight above
/// `threshold`.
pub fn component_labels(w: &GraphWeights, threshold: f64) -> Vec<usize> {
    let p = w.p();
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for ((i, j), &v) in pairs(p).zip(w.as_slice()) {
        if v > threshold {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut labels = vec![usize::MAX; p];
    let mut next = 0;
    let mut root_label = std::collections::HashMap::new();
    for (i, label) in labels.iter_mut().enumerate() {
        let r = find(&mut parent, i);
        *label = *root_label.entry(r).or_insert_with(|| {
            next += 1;
            next - 1
        });
    }
    labels
}
