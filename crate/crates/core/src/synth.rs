//! Planted-truth generators and recovery scoring.
//!
//! Every generator is deterministic given its parameters and seed
//! (ChaCha8 streams).

use std::collections::BTreeSet;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GraphError, Result};
use crate::graphcore::{
    component_labels, default_zero_tol, pair_index, pairs, sym_eigen, GraphWeights, LaplacianMatrix,
};
use crate::preprocess::ReturnsPanel;

/// Probability of each non-tree edge inside a planted component.
///
/// Complete components by default: an unregularized estimate has no reason
/// to put exact zeros inside a component, so support recovery is only
/// meaningful against dense groups.
pub const DEFAULT_EDGE_PROB: f64 = 1.0;

/// A Laplacian with a known number of components.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub laplacian: LaplacianMatrix,
    pub k: usize,
    /// Pairs `(i, j)`, `i < j`, with positive weight.
    pub edges: BTreeSet<(usize, usize)>,
    /// Component label of each node.
    pub groups: Vec<usize>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Balanced k-component graph: nodes are split into `k` contiguous groups
/// whose sizes differ by at most one, each a random connected graph.
pub fn random_k_component_graph(p: usize, k: usize, weight_range: (f64, f64), seed: u64) -> Result<PlantedGraph> {
    if k == 0 || 2 * k > p {
        return Err(GraphError::invalid(format!("need 1 <= k <= p/2, got k = {k}, p = {p}")));
    }
    let sizes: Vec<usize> = (0..k).map(|g| p / k + usize::from(g < p % k)).collect();
    random_graph_with_sizes(&sizes, weight_range, DEFAULT_EDGE_PROB, seed)
}

/// Components of the given sizes. Each component is a uniformly random
/// recursive spanning tree plus every other within-group pair with
/// probability `edge_prob`; weights are uniform on `weight_range`.
pub fn random_graph_with_sizes(
    sizes: &[usize],
    weight_range: (f64, f64),
    edge_prob: f64,
    seed: u64,
) -> Result<PlantedGraph> {
    let (lo, hi) = weight_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(GraphError::invalid(format!(
            "weight range must be a positive interval, got ({lo}, {hi})"
        )));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(GraphError::invalid("edge probability must lie in [0, 1]"));
    }
    if sizes.contains(&0) {
        return Err(GraphError::invalid("component sizes must be positive"));
    }
    let p: usize = sizes.iter().sum();
    if p < 2 {
        return Err(GraphError::invalid("need at least two nodes"));
    }
    let mut rng = rng(seed);
    let draw = |rng: &mut ChaCha8Rng| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let mut w = vec![0.0; p * (p - 1) / 2];
    let mut groups = Vec::with_capacity(p);
    let mut offset = 0;
    for (g, &size) in sizes.iter().enumerate() {
        groups.extend(std::iter::repeat_n(g, size));
        let mut order: Vec<usize> = (offset..offset + size).collect();
        order.shuffle(&mut rng);
        for t in 1..size {
            let parent = order[rng.random_range(0..t)];
            let (i, j) = (order[t].min(parent), order[t].max(parent));
            w[pair_index(p, i, j)] = draw(&mut rng);
        }
        for i in offset..offset + size {
            for j in i + 1..offset + size {
                let m = pair_index(p, i, j);
                if w[m] == 0.0 && rng.random::<f64>() < edge_prob {
                    w[m] = draw(&mut rng);
                }
            }
        }
        offset += size;
    }
    let edges = pairs(p).zip(&w).filter(|(_, &v)| v > 0.0).map(|(e, _)| e).collect();
    Ok(PlantedGraph {
        laplacian: GraphWeights::new(p, w)?.laplacian(),
        k: sizes.len(),
        edges,
        groups,
    })
}

/// Consecutive calendar days starting 2000-01-03.
pub fn synthetic_dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    (0..n).map(|t| start + chrono::Days::new(t as u64)).collect()
}

/// `S00`, `S01`, ... zero-padded to a common width.
pub fn synthetic_tickers(p: usize) -> Vec<String> {
    let width = p.saturating_sub(1).to_string().len().max(2);
    (0..p).map(|i| format!("S{i:0width$}")).collect()
}

/// `n` draws of `x ~ N(0, L†)`.
///
/// Uses `x = U diag(g) Uᵀ z` with `g(λ) = λ^{-1/2}` above the zero tolerance
/// and 0 otherwise, then removes any residual per-component mean so every
/// draw sums to zero on each component.
pub fn sample_gmrf(l: &LaplacianMatrix, n: usize, seed: u64) -> Result<ReturnsPanel> {
    let p = l.p();
    let eig = sym_eigen(l.matrix());
    let tol = default_zero_tol(eig.values[p - 1]);
    let g = DVector::from_iterator(p, eig.values.iter().map(|&v| if v > tol { v.powf(-0.5) } else { 0.0 }));
    let transform = &eig.vectors * DMatrix::from_diagonal(&g) * eig.vectors.transpose();
    let labels = component_labels(&l.weights(), 0.0);
    let n_groups = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_groups];
    for &c in &labels {
        sizes[c] += 1;
    }

    let mut rng = rng(seed);
    let mut out = DMatrix::zeros(n, p);
    let mut z = DVector::zeros(p);
    let mut sums = vec![0.0; n_groups];
    for t in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = &transform * &z;
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (i, &c) in labels.iter().enumerate() {
            sums[c] += x[i];
        }
        for (i, &c) in labels.iter().enumerate() {
            out[(t, i)] = x[i] - sums[c] / sizes[c] as f64;
        }
    }
    ReturnsPanel::new(synthetic_dates(n), synthetic_tickers(p), out)
}

/// A stretch of days with a fixed residual cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Regime {
    pub len: usize,
    /// Pairwise correlation of the idiosyncratic components, in `[0, 1)`.
    pub residual_corr: f64,
}

/// Single-factor market with regime-dependent residual correlation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FactorMarketSpec {
    pub p: usize,
    pub beta_range: (f64, f64),
    pub market_vol: f64,
    pub residual_vol: f64,
    pub regimes: Vec<Regime>,
}

impl Default for FactorMarketSpec {
    fn default() -> Self {
        Self {
            p: 10,
            beta_range: (0.8, 1.2),
            market_vol: 0.01,
            residual_vol: 0.01,
            regimes: vec![
                Regime {
                    len: 115,
                    residual_corr: 0.05,
                },
                Regime {
                    len: 115,
                    residual_corr: 0.6,
                },
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorMarket {
    pub returns: ReturnsPanel,
    pub market: Vec<f64>,
    pub betas: Vec<f64>,
    /// Row index where each regime starts.
    pub regime_starts: Vec<usize>,
}

/// Simulates `x_t = beta x_mkt,t + eps_t` where the residuals share a common
/// shock with weight `sqrt(residual_corr)` inside each regime.
pub fn simulate_factor_market(spec: &FactorMarketSpec, seed: u64) -> Result<FactorMarket> {
    let (blo, bhi) = spec.beta_range;
    if spec.p < 1 || spec.regimes.is_empty() {
        return Err(GraphError::invalid("need p >= 1 and at least one regime"));
    }
    if !(blo <= bhi) || !(spec.market_vol >= 0.0) || !(spec.residual_vol >= 0.0) {
        return Err(GraphError::invalid("invalid beta range or volatilities"));
    }
    if let Some(r) = spec
        .regimes
        .iter()
        .find(|r| !(0.0..1.0).contains(&r.residual_corr) || r.len == 0)
    {
        return Err(GraphError::invalid(format!("invalid regime {r:?}")));
    }
    let n: usize = spec.regimes.iter().map(|r| r.len).sum();
    let p = spec.p;
    let mut rng = rng(seed);
    let betas: Vec<f64> = (0..p)
        .map(|_| if bhi > blo { rng.random_range(blo..bhi) } else { blo })
        .collect();
    let mut market = Vec::with_capacity(n);
    let mut out = DMatrix::zeros(n, p);
    let mut regime_starts = Vec::with_capacity(spec.regimes.len());
    let mut t = 0;
    for regime in &spec.regimes {
        regime_starts.push(t);
        let common = regime.residual_corr.sqrt();
        let own = (1.0 - regime.residual_corr).sqrt();
        for _ in 0..regime.len {
            let m: f64 = spec.market_vol * rng.sample::<f64, _>(StandardNormal);
            let f: f64 = rng.sample(StandardNormal);
            for (i, beta) in betas.iter().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                out[(t, i)] = beta * m + spec.residual_vol * (common * f + own * e);
            }
            market.push(m);
            t += 1;
        }
    }
    Ok(FactorMarket {
        returns: ReturnsPanel::new(synthetic_dates(n), synthetic_tickers(p), out)?,
        market,
        betas,
        regime_starts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RecoveryScore {
    pub f_score: f64,
    pub precision: f64,
    pub recall: f64,
    /// `||L_hat - L||_F / ||L||_F`
    pub relative_error: f64,
}

/// Edge-support recovery of `l_hat` against the planted graph. An edge is
/// predicted when its weight exceeds `edge_threshold`, by default `1e-4`
/// times the largest estimated weight.
pub fn score_recovery(
    l_hat: &LaplacianMatrix,
    planted: &PlantedGraph,
    edge_threshold: Option<f64>,
) -> Result<RecoveryScore> {
    let truth = &planted.laplacian;
    if l_hat.p() != truth.p() {
        return Err(GraphError::DimensionMismatch {
            expected: truth.p(),
            actual: l_hat.p(),
        });
    }
    let w = l_hat.weights();
    let threshold = edge_threshold.unwrap_or(1e-4 * w.max_weight());
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for ((i, j), &v) in pairs(w.p()).zip(w.as_slice()) {
        match (v > threshold, planted.edges.contains(&(i, j))) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    let precision = ratio(tp, fp);
    let recall = ratio(tp, fneg);
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let norm = truth.frobenius_norm();
    let relative_error = (l_hat.matrix() - truth.matrix()).norm() / if norm > 0.0 { norm } else { 1.0 };
    Ok(RecoveryScore {
        f_score,
        precision,
        recall,
        relative_error,
    })
}
