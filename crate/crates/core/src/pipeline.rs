//! Returns panel → similarity matrices: market handling, scaling and
//! rolling windows. Shared by the command line and by anything that wants
//! the same preprocessing without going through files.

use chrono::NaiveDate;

use crate::error::{GraphError, Result};
use crate::preprocess::{
    correlation_from_covariance, cross_sectional_mean, remove_market_factor, sample_covariance, ReturnsPanel,
    SimilarityKind, SimilarityMatrix,
};

/// What to do with the common market component before estimating a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketTreatment {
    #[default]
    Keep,
    /// Regress every asset on the market and keep the residuals.
    Remove,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Preprocessing {
    pub scale: SimilarityKind,
    pub market: MarketTreatment,
    /// Column holding a market index. It is never treated as an asset.
    /// Without it, the cross-sectional mean is the market proxy.
    pub market_column: Option<String>,
    /// Fit the market regression with an intercept.
    pub intercept: bool,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            scale: SimilarityKind::Correlation,
            market: MarketTreatment::Keep,
            market_column: None,
            intercept: true,
        }
    }
}

/// Asset returns plus the market series used for removal, if any.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    pub assets: ReturnsPanel,
    pub market: Option<Vec<f64>>,
}

/// Splits off the market column and, when removal is requested, fixes the
/// market series (the cross-sectional mean is computed date by date, so it
/// carries no information from other dates).
pub fn prepare(returns: &ReturnsPanel, opts: &Preprocessing) -> Result<PreparedPanel> {
    let (assets, column) = match &opts.market_column {
        Some(name) => {
            let idx = returns
                .tickers
                .iter()
                .position(|t| t == name)
                .ok_or_else(|| GraphError::invalid(format!("market column '{name}' not found")))?;
            let (assets, market) = returns.split_column(idx);
            (assets, Some(market))
        }
        None => (returns.clone(), None),
    };
    if assets.p() < 2 {
        return Err(GraphError::invalid(format!(
            "need at least two assets, got {}",
            assets.p()
        )));
    }
    let market = match opts.market {
        MarketTreatment::Keep => column,
        MarketTreatment::Remove => Some(column.unwrap_or_else(|| cross_sectional_mean(&assets))),
    };
    Ok(PreparedPanel { assets, market })
}

/// Similarity of rows `start..end` of a prepared panel.
///
/// Market removal is fitted on the same rows, so a window never sees
/// loadings estimated from other dates.
pub fn window_similarity(
    panel: &PreparedPanel,
    start: usize,
    end: usize,
    opts: &Preprocessing,
) -> Result<SimilarityMatrix> {
    let x = panel.assets.slice_rows(start, end);
    let x = match (opts.market, &panel.market) {
        (MarketTreatment::Remove, Some(m)) => remove_market_factor(&x, &m[start..end], opts.intercept)?.residuals,
        _ => x,
    };
    let cov = sample_covariance(&x)?;
    match opts.scale {
        SimilarityKind::Covariance => Ok(cov),
        SimilarityKind::Correlation => correlation_from_covariance(&cov, &x.tickers),
    }
}

/// Similarity of the whole panel.
pub fn similarity(panel: &PreparedPanel, opts: &Preprocessing) -> Result<SimilarityMatrix> {
    window_similarity(panel, 0, panel.assets.n(), opts)
}

/// First row of every full window of length `window`, moving by `stride`.
pub fn window_starts(n: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window < 2 {
        return Err(GraphError::invalid(format!("window must be at least 2, got {window}")));
    }
    if stride < 1 {
        return Err(GraphError::invalid("stride must be at least 1"));
    }
    if n < window {
        return Err(GraphError::InsufficientData {
            required: window,
            actual: n,
        });
    }
    Ok((0..=n - window).step_by(stride).collect())
}

/// One similarity matrix per rolling window.
#[derive(Debug, Clone)]
pub struct RollingWindows {
    pub similarities: Vec<SimilarityMatrix>,
    /// Observations in each window.
    pub counts: Vec<usize>,
    pub start_dates: Vec<NaiveDate>,
    /// Date of the last row; the window's estimate is known at its close.
    pub end_dates: Vec<NaiveDate>,
}

pub fn rolling_similarities(
    panel: &PreparedPanel,
    window: usize,
    stride: usize,
    opts: &Preprocessing,
) -> Result<RollingWindows> {
    let dates = &panel.assets.dates;
    let starts = window_starts(panel.assets.n(), window, stride)?;
    let mut out = RollingWindows {
        similarities: Vec::with_capacity(starts.len()),
        counts: Vec::with_capacity(starts.len()),
        start_dates: Vec::with_capacity(starts.len()),
        end_dates: Vec::with_capacity(starts.len()),
    };
    for s in starts {
        let sim = window_similarity(panel, s, s + window, opts)
            .map_err(|e| GraphError::invalid(format!("window starting {}: {e}", dates[s])))?;
        out.similarities.push(sim);
        out.counts.push(window);
        out.start_dates.push(dates[s]);
        out.end_dates.push(dates[s + window - 1]);
    }
    Ok(out)
}
