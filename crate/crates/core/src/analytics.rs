//! Spectral market indicators and the connectivity-gated backtest.

use chrono::NaiveDate;

use crate::error::{GraphError, Result};
use crate::graphcore::{spectral_summary, time_consistency, LaplacianMatrix};
use crate::preprocess::ReturnsPanel;

/// Default connectivity threshold of the gated strategy.
pub const DEFAULT_TAU: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IndicatorSeries {
    pub dates: Vec<NaiveDate>,
    pub algebraic_connectivity: Vec<f64>,
    pub spectral_radius: Vec<f64>,
    /// `||L_{t+1} - L_t||_F^2`, one shorter than the other series.
    pub time_consistency: Vec<f64>,
}

impl IndicatorSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

pub fn compute_indicators(laplacians: &[LaplacianMatrix], dates: &[NaiveDate]) -> Result<IndicatorSeries> {
    let Some(first) = laplacians.first() else {
        return Err(GraphError::invalid("empty Laplacian sequence"));
    };
    if dates.len() != laplacians.len() {
        return Err(GraphError::DimensionMismatch {
            expected: laplacians.len(),
            actual: dates.len(),
        });
    }
    let p = first.p();
    let mut lambda2 = Vec::with_capacity(laplacians.len());
    let mut lmax = Vec::with_capacity(laplacians.len());
    for l in laplacians {
        if l.p() != p {
            return Err(GraphError::DimensionMismatch {
                expected: p,
                actual: l.p(),
            });
        }
        let s = spectral_summary(l, None);
        lambda2.push(s.algebraic_connectivity);
        lmax.push(s.spectral_radius);
    }
    let consistency = laplacians
        .windows(2)
        .map(|pair| time_consistency(&pair[1], &pair[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorSeries {
        dates: dates.to_vec(),
        algebraic_connectivity: lambda2,
        spectral_radius: lmax,
        time_consistency: consistency,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BacktestResult {
    pub dates: Vec<NaiveDate>,
    /// 1 invested, 0 flat.
    pub positions: Vec<f64>,
    pub daily_pnl: Vec<f64>,
    pub cumulative_pnl: Vec<f64>,
}

/// Which side of the threshold opens the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateDirection {
    /// Invest while algebraic connectivity is below tau.
    #[default]
    InvestBelow,
    /// Invest while algebraic connectivity is at or above tau.
    InvestAbove,
}

pub fn cumulative_pnl(daily: &[f64]) -> Vec<f64> {
    daily
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn equal_weight_returns(returns: &ReturnsPanel) -> Vec<f64> {
    let p = returns.p() as f64;
    returns.returns.row_iter().map(|r| r.sum() / p).collect()
}

/// Unit budget spread equally across assets every day.
pub fn strategy_s1(returns: &ReturnsPanel) -> BacktestResult {
    let daily = equal_weight_returns(returns);
    BacktestResult {
        dates: returns.dates.clone(),
        positions: vec![1.0; daily.len()],
        cumulative_pnl: cumulative_pnl(&daily),
        daily_pnl: daily,
    }
}

/// Connectivity-gated equal-weight strategy.
///
/// The position on return day `t` uses the indicator dated on day `t - 1`
/// (the graph estimated from data through the previous day). Days with no
/// such indicator are flat. Indicator dates must all appear among the return
/// dates.
pub fn strategy_s2(
    returns: &ReturnsPanel,
    indicators: &IndicatorSeries,
    tau: f64,
    direction: GateDirection,
) -> Result<BacktestResult> {
    let lagged = lagged_connectivity(returns, indicators)?;
    let portfolio = equal_weight_returns(returns);
    let positions: Vec<f64> = lagged
        .iter()
        .map(|c| match c {
            Some(c) => {
                let open = match direction {
                    GateDirection::InvestBelow => *c < tau,
                    GateDirection::InvestAbove => *c >= tau,
                };
                if open {
                    1.0
                } else {
                    0.0
                }
            }
            None => 0.0,
        })
        .collect();
    let daily: Vec<f64> = positions
        .iter()
        .zip(&portfolio)
        .map(|(pos, r)| if *pos == 1.0 { *r } else { 0.0 })
        .collect();
    Ok(BacktestResult {
        dates: returns.dates.clone(),
        positions,
        cumulative_pnl: cumulative_pnl(&daily),
        daily_pnl: daily,
    })
}

/// Connectivity available before each return day, `None` before the first
/// indicator.
pub fn lagged_connectivity(returns: &ReturnsPanel, indicators: &IndicatorSeries) -> Result<Vec<Option<f64>>> {
    let index: std::collections::HashMap<NaiveDate, usize> =
        returns.dates.iter().enumerate().map(|(t, d)| (*d, t)).collect();
    let mut lagged = vec![None; returns.n()];
    let mut last = None;
    for (k, d) in indicators.dates.iter().enumerate() {
        let Some(&t) = index.get(d) else {
            return Err(GraphError::invalid(format!("indicator date {d} is not a return date")));
        };
        if last.is_some_and(|prev| t <= prev) {
            return Err(GraphError::invalid(format!(
                "indicator dates are not increasing at {d}"
            )));
        }
        last = Some(t);
        if t + 1 < lagged.len() {
            lagged[t + 1] = Some(indicators.algebraic_connectivity[k]);
        }
    }
    Ok(lagged)
}

/// Return days that have a lagged indicator, i.e. the span on which S1 and
/// S2 are compared.
pub fn evaluation_span(returns: &ReturnsPanel, indicators: &IndicatorSeries) -> Result<ReturnsPanel> {
    let lagged = lagged_connectivity(returns, indicators)?;
    let Some(start) = lagged.iter().position(Option::is_some) else {
        return Err(GraphError::invalid("no return day follows an indicator"));
    };
    let end = lagged.iter().rposition(Option::is_some).map_or(start, |e| e + 1);
    if lagged[start..end].iter().any(Option::is_none) {
        return Err(GraphError::invalid(
            "indicator series has gaps inside the evaluation span",
        ));
    }
    Ok(returns.slice_rows(start, end))
}

/// Single mean-shift change point: the split `c` (first index of the second
/// segment) minimizing the within-segment sum of squares. `None` for fewer
/// than two points.
pub fn mean_shift_change_point(series: &[f64]) -> Option<usize> {
    let n = series.len();
    if n < 2 {
        return None;
    }
    let total: f64 = series.iter().sum();
    let total_sq: f64 = series.iter().map(|v| v * v).sum();
    let mut left = 0.0;
    let mut left_sq = 0.0;
    let mut best = (f64::INFINITY, 1);
    for c in 1..n {
        left += series[c - 1];
        left_sq += series[c - 1] * series[c - 1];
        let (nl, nr) = (c as f64, (n - c) as f64);
        let right = total - left;
        let sse = (left_sq - left * left / nl) + (total_sq - left_sq - right * right / nr);
        if sse < best.0 {
            best = (sse, c);
        }
    }
    Some(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcore::GraphWeights;
    use nalgebra::DMatrix;

    fn days(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        (0..n).map(|k| d0 + chrono::Days::new(k as u64)).collect()
    }

    fn returns(rows: usize, cols: usize, data: &[f64]) -> ReturnsPanel {
        let tickers = (0..cols).map(|i| format!("A{i}")).collect();
        ReturnsPanel::new(days(rows), tickers, DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    fn indicator(dates: Vec<NaiveDate>, lambda2: Vec<f64>) -> IndicatorSeries {
        IndicatorSeries {
            spectral_radius: lambda2.clone(),
            time_consistency: vec![0.0; lambda2.len().saturating_sub(1)],
            algebraic_connectivity: lambda2,
            dates,
        }
    }

    #[test]
    fn cumulative_examples() {
        assert_eq!(cumulative_pnl(&[1.0, -1.0]), vec![1.0, 0.0]);
        assert!(cumulative_pnl(&[]).is_empty());
    }

    #[test]
    fn s1_examples() {
        let r = strategy_s1(&returns(3, 1, &[0.01, -0.02, 0.03]));
        let want = [0.01, -0.01, 0.02];
        for (a, b) in r.cumulative_pnl.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(strategy_s1(&returns(2, 2, &[0.0; 4])).cumulative_pnl, vec![0.0, 0.0]);
        assert_eq!(strategy_s1(&returns(1, 2, &[0.02, 0.0])).daily_pnl, vec![0.01]);
    }

    #[test]
    fn s2_hand_traced_four_days() {
        let r = returns(4, 2, &[0.01, 0.03, -0.02, 0.04, 0.05, 0.01, -0.03, -0.01]);
        let ind = indicator(days(3), vec![0.5, 2.0, 0.5]);
        let bt = strategy_s2(&r, &ind, 1.0, GateDirection::InvestBelow).unwrap();
        assert_eq!(bt.positions, vec![0.0, 1.0, 0.0, 1.0]);
        for (a, b) in bt.daily_pnl.iter().zip([0.0, 0.01, 0.0, -0.02]) {
            assert!((a - b).abs() < 1e-15);
        }
        let inv = strategy_s2(&r, &ind, 1.0, GateDirection::InvestAbove).unwrap();
        assert_eq!(inv.positions, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn s2_rejects_misaligned_indicators() {
        let r = returns(2, 1, &[0.01, 0.02]);
        let ind = indicator(vec![NaiveDate::from_ymd_opt(1999, 1, 1).unwrap()], vec![0.5]);
        assert!(strategy_s2(&r, &ind, 1.0, GateDirection::InvestBelow).is_err());
    }

    #[test]
    fn change_point_of_a_step() {
        let mut v = vec![0.0; 7];
        v.extend([3.0; 5]);
        assert_eq!(mean_shift_change_point(&v), Some(7));
        assert_eq!(mean_shift_change_point(&[1.0, 5.0]), Some(1));
        assert_eq!(mean_shift_change_point(&[1.0]), None);
    }

    #[test]
    fn indicator_examples() {
        let k3 = GraphWeights::new(3, vec![1.0; 3]).unwrap().laplacian();
        let split = GraphWeights::new(3, vec![1.0, 0.0, 0.0]).unwrap().laplacian();
        let ind = compute_indicators(&[k3.clone(), k3.clone()], &days(2)).unwrap();
        assert_eq!(ind.time_consistency, vec![0.0]);
        let ind = compute_indicators(&[k3, split], &days(2)).unwrap();
        assert!((ind.algebraic_connectivity[0] - 3.0).abs() < 1e-12);
        assert!(ind.algebraic_connectivity[1].abs() < 1e-12);
        assert!(compute_indicators(&[], &[]).is_err());
    }
}
