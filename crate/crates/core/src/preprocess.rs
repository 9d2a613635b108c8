//! Price panels to solver inputs: log-returns, covariance and correlation,
//! market-factor residuals and squared-distance matrices.

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{GraphError, Result};

/// Strictly positive prices, one row per date and one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &tickers, &prices)?;
        if let Some(k) = dates.windows(2).position(|d| d[1] <= d[0]) {
            return Err(GraphError::invalid(format!(
                "dates must be strictly increasing ({} followed by {})",
                dates[k],
                dates[k + 1]
            )));
        }
        Ok(Self { dates, tickers, prices })
    }
}

/// Log-returns (or any derived return series), `n x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub returns: DMatrix<f64>,
}

impl ReturnsPanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        check_shape(&dates, &tickers, &returns)?;
        if returns.nrows() < 1 {
            return Err(GraphError::InsufficientData { required: 1, actual: 0 });
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(GraphError::invalid("returns contain non-finite entries"));
        }
        Ok(Self {
            dates,
            tickers,
            returns,
        })
    }

    pub fn n(&self) -> usize {
        self.returns.nrows()
    }

    pub fn p(&self) -> usize {
        self.returns.ncols()
    }

    /// Rows `start..end` as a new panel.
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnsPanel {
        ReturnsPanel {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            returns: self.returns.rows(start, end - start).into_owned(),
        }
    }

    /// Panel without column `idx`, plus that column.
    pub fn split_column(&self, idx: usize) -> (ReturnsPanel, Vec<f64>) {
        let col = self.returns.column(idx).iter().copied().collect();
        let mut tickers = self.tickers.clone();
        tickers.remove(idx);
        let panel = ReturnsPanel {
            dates: self.dates.clone(),
            tickers,
            returns: self.returns.clone().remove_column(idx),
        };
        (panel, col)
    }
}

fn check_shape(dates: &[NaiveDate], tickers: &[String], m: &DMatrix<f64>) -> Result<()> {
    if dates.len() != m.nrows() {
        return Err(GraphError::DimensionMismatch {
            expected: m.nrows(),
            actual: dates.len(),
        });
    }
    if tickers.len() != m.ncols() {
        return Err(GraphError::DimensionMismatch {
            expected: m.ncols(),
            actual: tickers.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Covariance,
    Correlation,
}

/// Covariance or correlation matrix fed to the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub entries: DMatrix<f64>,
    pub kind: SimilarityKind,
}

impl SimilarityMatrix {
    pub fn new(entries: DMatrix<f64>, kind: SimilarityKind) -> Result<Self> {
        let p = entries.nrows();
        if entries.ncols() != p {
            return Err(GraphError::invalid("similarity matrix must be square"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(GraphError::invalid("similarity matrix has non-finite entries"));
        }
        for i in 0..p {
            for j in i + 1..p {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(GraphError::invalid(format!(
                        "similarity matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { entries, kind })
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }
}

/// `r[t,i] = ln(price[t+1,i]) - ln(price[t,i])`, dated at the later row.
pub fn log_returns(panel: &PricePanel) -> Result<ReturnsPanel> {
    let (n_raw, p) = panel.prices.shape();
    if n_raw < 2 {
        return Err(GraphError::InsufficientData {
            required: 2,
            actual: n_raw,
        });
    }
    for i in 0..p {
        for t in 0..n_raw {
            let v = panel.prices[(t, i)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(GraphError::NonPositivePrice {
                    row: t,
                    ticker: panel.tickers[i].clone(),
                    value: v,
                });
            }
        }
    }
    let returns = DMatrix::from_fn(n_raw - 1, p, |t, i| {
        panel.prices[(t + 1, i)].ln() - panel.prices[(t, i)].ln()
    });
    ReturnsPanel::new(panel.dates[1..].to_vec(), panel.tickers.clone(), returns)
}

fn column_means(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.column_iter().map(|c| c.sum() / n).collect()
}

/// Unbiased sample covariance with the `n - 1` denominator.
pub fn sample_covariance(x: &ReturnsPanel) -> Result<SimilarityMatrix> {
    let n = x.n();
    if n < 2 {
        return Err(GraphError::InsufficientData { required: 2, actual: n });
    }
    let means = column_means(&x.returns);
    let centered = DMatrix::from_fn(n, x.p(), |t, i| x.returns[(t, i)] - means[i]);
    let mut s = centered.tr_mul(&centered) / (n as f64 - 1.0);
    // Exact symmetry regardless of the GEMM summation order.
    for i in 0..s.nrows() {
        for j in i + 1..s.ncols() {
            s[(j, i)] = s[(i, j)];
        }
    }
    SimilarityMatrix::new(s, SimilarityKind::Covariance)
}

/// `Diag(S)^{-1/2} S Diag(S)^{-1/2}`. `tickers` names the offending column on error.
pub fn correlation_from_covariance(s: &SimilarityMatrix, tickers: &[String]) -> Result<SimilarityMatrix> {
    if s.kind != SimilarityKind::Covariance {
        return Err(GraphError::invalid("input is already a correlation matrix"));
    }
    let p = s.p();
    let sd: Vec<f64> = (0..p).map(|i| s.entries[(i, i)].sqrt()).collect();
    if let Some(i) = sd.iter().position(|&v| !(v > 0.0)) {
        let name = tickers.get(i).cloned().unwrap_or_else(|| format!("column {i}"));
        return Err(GraphError::ZeroVariance(name));
    }
    let mut c = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (s.entries[(i, j)] / sd[i] / sd[j]).clamp(-1.0, 1.0)
        }
    });
    for i in 0..p {
        for j in i + 1..p {
            c[(j, i)] = c[(i, j)];
        }
    }
    SimilarityMatrix::new(c, SimilarityKind::Correlation)
}

/// Residuals of a single-factor regression of every asset on the market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketResiduals {
    pub residuals: ReturnsPanel,
    /// Per-asset market loading.
    pub beta: Vec<f64>,
    /// Per-asset intercept (all zero when fitted without intercept).
    pub intercept: Vec<f64>,
}

/// Cross-sectional mean return per date, the default market proxy.
pub fn cross_sectional_mean(x: &ReturnsPanel) -> Vec<f64> {
    let p = x.p() as f64;
    x.returns.row_iter().map(|r| r.sum() / p).collect()
}

/// Per-asset OLS of each column on `market`, returning residuals.
pub fn remove_market_factor(x: &ReturnsPanel, market: &[f64], with_intercept: bool) -> Result<MarketResiduals> {
    let n = x.n();
    if market.len() != n {
        return Err(GraphError::DimensionMismatch {
            expected: n,
            actual: market.len(),
        });
    }
    let m_mean = if with_intercept {
        market.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let m_c: Vec<f64> = market.iter().map(|v| v - m_mean).collect();
    let sxx: f64 = m_c.iter().map(|v| v * v).sum();
    if !(sxx > 0.0) {
        return Err(GraphError::ZeroVariance("market".into()));
    }
    let p = x.p();
    let mut beta = Vec::with_capacity(p);
    let mut intercept = Vec::with_capacity(p);
    let mut res = DMatrix::zeros(n, p);
    for i in 0..p {
        let col = x.returns.column(i);
        let y_mean = if with_intercept { col.sum() / n as f64 } else { 0.0 };
        let sxy: f64 = col.iter().zip(&m_c).map(|(y, m)| (y - y_mean) * m).sum();
        let b = sxy / sxx;
        let a = y_mean - b * m_mean;
        for t in 0..n {
            res[(t, i)] = col[t] - a - b * market[t];
        }
        beta.push(b);
        intercept.push(a);
    }
    Ok(MarketResiduals {
        residuals: ReturnsPanel::new(x.dates.clone(), x.tickers.clone(), res)?,
        beta,
        intercept,
    })
}

/// `x_t - beta x_mkt,t` for known loadings, without fitting anything.
pub fn subtract_market(x: &ReturnsPanel, market: &[f64], beta: &[f64]) -> Result<ReturnsPanel> {
    if market.len() != x.n() {
        return Err(GraphError::DimensionMismatch {
            expected: x.n(),
            actual: market.len(),
        });
    }
    if beta.len() != x.p() {
        return Err(GraphError::DimensionMismatch {
            expected: x.p(),
            actual: beta.len(),
        });
    }
    let res = DMatrix::from_fn(x.n(), x.p(), |t, i| x.returns[(t, i)] - beta[i] * market[t]);
    ReturnsPanel::new(x.dates.clone(), x.tickers.clone(), res)
}

/// `Z_ij = ||x_i - x_j||^2` over columns.
pub fn distance_matrix(x: &ReturnsPanel) -> DMatrix<f64> {
    let p = x.p();
    let mut z = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let d: f64 = x
                .returns
                .column(i)
                .iter()
                .zip(x.returns.column(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            z[(i, j)] = d;
            z[(j, i)] = d;
        }
    }
    z
}

/// Demeans every column and scales it to unit standard deviation, using the
/// population (`1/n`) convention so that `(1, -1)` is already normalized.
pub fn normalize_columns(x: &ReturnsPanel) -> Result<ReturnsPanel> {
    let n = x.n();
    if n < 2 {
        return Err(GraphError::InsufficientData { required: 2, actual: n });
    }
    let means = column_means(&x.returns);
    let mut out = x.returns.clone();
    for i in 0..x.p() {
        let var = x.returns.column(i).iter().map(|v| (v - means[i]).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) || sd < 1e-14 * means[i].abs() {
            return Err(GraphError::ZeroVariance(x.tickers[i].clone()));
        }
        for t in 0..n {
            out[(t, i)] = (x.returns[(t, i)] - means[i]) / sd;
        }
    }
    ReturnsPanel::new(x.dates.clone(), x.tickers.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        (0..n).map(|k| d0 + chrono::Days::new(k as u64)).collect()
    }

    fn panel(rows: usize, cols: usize, data: &[f64]) -> ReturnsPanel {
        let tickers = (0..cols).map(|i| format!("T{i}")).collect();
        ReturnsPanel::new(dates(rows), tickers, DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn log_return_examples() {
        let e = std::f64::consts::E;
        let pp = PricePanel::new(
            dates(3),
            vec!["A".into()],
            DMatrix::from_column_slice(3, 1, &[1.0, e, e]),
        )
        .unwrap();
        let r = log_returns(&pp).unwrap();
        assert_relative_eq!(r.returns[(0, 0)], 1.0, epsilon = 1e-15);
        assert_eq!(r.returns[(1, 0)], 0.0);
        assert_eq!(r.dates, pp.dates[1..].to_vec());

        let pp = PricePanel::new(
            dates(2),
            vec!["A".into()],
            DMatrix::from_column_slice(2, 1, &[100.0, 101.0]),
        )
        .unwrap();
        assert_relative_eq!(log_returns(&pp).unwrap().returns[(0, 0)], 1.01f64.ln(), epsilon = 1e-15);

        let pp = PricePanel::new(
            dates(2),
            vec!["A".into()],
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(
            log_returns(&pp),
            Err(GraphError::NonPositivePrice { row: 1, .. })
        ));
    }

    #[test]
    fn price_panel_requires_increasing_dates() {
        let mut d = dates(2);
        d.swap(0, 1);
        assert!(PricePanel::new(d, vec!["A".into()], DMatrix::from_element(2, 1, 1.0)).is_err());
    }

    #[test]
    fn covariance_examples() {
        let s = sample_covariance(&panel(2, 2, &[1.0, 0.0, -1.0, 0.0])).unwrap();
        assert_eq!(s.entries, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        let s = sample_covariance(&panel(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.entries, DMatrix::zeros(2, 2));
        assert!(sample_covariance(&panel(1, 2, &[1.0, 2.0])).is_err());
    }

    #[test]
    fn covariance_matches_direct_double_loop() {
        let data = [
            0.3, -1.2, 0.5, 2.0, 0.1, -0.7, -0.4, 0.9, 1.1, 0.0, -2.2, 0.6, 1.5, 0.2, -0.3,
        ];
        let x = panel(5, 3, &data);
        let s = sample_covariance(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mi: f64 = (0..5).map(|t| data[t * 3 + i]).sum::<f64>() / 5.0;
                let mj: f64 = (0..5).map(|t| data[t * 3 + j]).sum::<f64>() / 5.0;
                let c: f64 = (0..5)
                    .map(|t| (data[t * 3 + i] - mi) * (data[t * 3 + j] - mj))
                    .sum::<f64>()
                    / 4.0;
                assert_relative_eq!(s.entries[(i, j)], c, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn correlation_examples() {
        let names = vec!["A".to_string(), "B".to_string()];
        let cov =
            |d: &[f64]| SimilarityMatrix::new(DMatrix::from_row_slice(2, 2, d), SimilarityKind::Covariance).unwrap();
        let c = correlation_from_covariance(&cov(&[4.0, 2.0, 2.0, 1.0]), &names).unwrap();
        assert_eq!(c.entries, DMatrix::from_element(2, 2, 1.0));
        let c = correlation_from_covariance(&cov(&[3.0, 0.0, 0.0, 7.0]), &names).unwrap();
        assert_eq!(c.entries, DMatrix::identity(2, 2));
        let c = correlation_from_covariance(&cov(&[2.0, -1.0, -1.0, 2.0]), &names).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        assert!((c.entries - want).amax() < 1e-15);
        assert_eq!(c.kind, SimilarityKind::Correlation);
        match correlation_from_covariance(&cov(&[1.0, 0.0, 0.0, 0.0]), &names) {
            Err(GraphError::ZeroVariance(name)) => assert_eq!(name, "B"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn market_removal_examples() {
        let m = [0.01, -0.02, 0.03, 0.00, 0.015];
        let x = ReturnsPanel::new(dates(5), vec!["A".into()], DMatrix::from_column_slice(5, 1, &m)).unwrap();
        let r = remove_market_factor(&x, &m, true).unwrap();
        assert_relative_eq!(r.beta[0], 1.0, epsilon = 1e-12);
        assert!(r.residuals.returns.amax() < 1e-15);

        // Column orthogonal (zero sample covariance) to the market.
        let col = [1.0, 2.0, 1.0, 2.0];
        let mkt = [1.0, 1.0, -1.0, -1.0];
        let x = ReturnsPanel::new(dates(4), vec!["A".into()], DMatrix::from_column_slice(4, 1, &col)).unwrap();
        let r = remove_market_factor(&x, &mkt, true).unwrap();
        assert_eq!(r.beta[0], 0.0);
        for (t, v) in col.iter().enumerate() {
            assert_relative_eq!(r.residuals.returns[(t, 0)], v - 1.5, epsilon = 1e-15);
        }

        assert!(matches!(
            remove_market_factor(&x, &[1.0; 4], true),
            Err(GraphError::ZeroVariance(_))
        ));
        assert!(remove_market_factor(&x, &[1.0; 3], true).is_err());
    }

    #[test]
    fn distance_and_normalization_examples() {
        let z = distance_matrix(&panel(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        assert_eq!(z[(0, 1)], 2.0);
        assert_eq!(z[(0, 0)], 0.0);
        let z = distance_matrix(&panel(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]));
        assert_eq!(z, DMatrix::zeros(2, 2));

        let x = normalize_columns(&panel(2, 1, &[1.0, -1.0])).unwrap();
        assert_eq!(x.returns.as_slice(), &[1.0, -1.0]);
        let x = normalize_columns(&panel(2, 1, &[2.0, 0.0])).unwrap();
        assert_eq!(x.returns.as_slice(), &[1.0, -1.0]);
        assert!(matches!(
            normalize_columns(&panel(3, 1, &[2.0, 2.0, 2.0])),
            Err(GraphError::ZeroVariance(_))
        ));
    }

    #[test]
    fn normalization_is_affine_invariant() {
        let data = [0.4, -1.0, 2.5, 0.3, -0.8];
        let a = normalize_columns(&panel(5, 1, &data)).unwrap();
        let moved: Vec<f64> = data.iter().map(|v| 3.7 * v - 1.25).collect();
        let b = normalize_columns(&panel(5, 1, &moved)).unwrap();
        for (x, y) in a.returns.iter().zip(b.returns.iter()) {
            assert_relative_eq!(x, y, epsilon = 1e-13);
        }
    }
}
