//! The five subcommands. Each writes its artifacts into the output directory
//! and reports whether every solve converged.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde_json::{json, Value};

use super::config::{InputFormat, Method, RunConfig, SynthKind};
use super::io::{self, MissingPolicy};
use super::Outcome;
use crate::analytics::{compute_indicators, evaluation_span, strategy_s1, strategy_s2, GateDirection, IndicatorSeries};
use crate::error::{GraphError, Result};
use crate::graphcore::{spectral_summary, LaplacianMatrix};
use crate::pipeline::{self, MarketTreatment, PreparedPanel};
use crate::preprocess::{
    distance_matrix, log_returns, normalize_columns, remove_market_factor, ReturnsPanel, SimilarityKind,
};
use crate::solvers::{learn_connected_mle, learn_k_component, learn_smooth_graph, learn_time_varying, SolveReport};
use crate::synth::{
    random_k_component_graph, sample_gmrf, simulate_factor_market, synthetic_dates, FactorMarketSpec, Regime,
};

/// Edge weights of planted graphs written by `synth`.
const SYNTH_WEIGHT_RANGE: (f64, f64) = (0.5, 2.0);
const SYNTH_GMRF_P: usize = 30;
const SYNTH_GMRF_N: usize = 3000;
const MARKET_TICKER: &str = "MKT";

fn meta(command: &str, cfg: &RunConfig, started: Instant, converged: bool, details: Value) -> Value {
    let mut m = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.seed,
        "converged": converged,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "config": cfg,
    });
    if let (Value::Object(m), Value::Object(d)) = (&mut m, details) {
        m.extend(d);
    }
    m
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn missing_policy(cfg: &RunConfig) -> MissingPolicy {
    if cfg.ffill {
        MissingPolicy::ForwardFill
    } else {
        MissingPolicy::DropRow
    }
}

fn existing_input(cfg: &RunConfig) -> Result<&Path> {
    let path = cfg.input_path()?;
    if !path.exists() {
        return Err(GraphError::invalid(format!("input {} does not exist", path.display())));
    }
    Ok(path)
}

/// Returns of every column in the input file (market column included).
fn load_returns(cfg: &RunConfig) -> Result<ReturnsPanel> {
    let path = existing_input(cfg)?;
    let returns = match cfg.input_format {
        InputFormat::Prices => log_returns(&io::ingest_prices(path, missing_policy(cfg))?.0)?,
        InputFormat::Returns => io::ingest_returns(path, missing_policy(cfg))?.0,
    };
    log::info!(
        "{}: {} return days, {} columns",
        path.display(),
        returns.n(),
        returns.p()
    );
    Ok(returns)
}

fn report_json(report: &SolveReport) -> Value {
    json!({
        "objective": report.final_objective(),
        "objective_trace": report.objective_trace,
        "iterations": report.iterations,
        "kkt_residual": report.kkt_residual,
        "constraint_residuals": report.residuals,
        "warnings": report.warnings,
    })
}

/// Market-adjusted (and, for correlation, standardized) returns for the
/// smooth-signal distance matrix.
fn smooth_inputs(panel: &PreparedPanel, cfg: &RunConfig) -> Result<ReturnsPanel> {
    let x = match (cfg.market, &panel.market) {
        (MarketTreatment::Remove, Some(m)) => remove_market_factor(&panel.assets, m, cfg.intercept)?.residuals,
        _ => panel.assets.clone(),
    };
    match cfg.scale {
        SimilarityKind::Covariance => Ok(x),
        SimilarityKind::Correlation => normalize_columns(&x),
    }
}

pub fn learn(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let returns = load_returns(cfg)?;
    let prepared = pipeline::prepare(&returns, &cfg.preprocessing())?;
    let tickers = prepared.assets.tickers.clone();
    let solver = cfg.solver();
    let method = match cfg.method {
        Method::Auto if cfg.k > 1 => Method::KComponent,
        Method::Auto => Method::Mle,
        m => m,
    };
    if cfg.k > 1 && method != Method::KComponent {
        return Err(GraphError::invalid("k > 1 needs method k-component (or auto)"));
    }
    let (laplacian, report) = match method {
        Method::Mle | Method::Auto => {
            learn_connected_mle(&pipeline::similarity(&prepared, &cfg.preprocessing())?, &solver)?
        }
        Method::KComponent => learn_k_component(&pipeline::similarity(&prepared, &cfg.preprocessing())?, &solver)?,
        Method::Smooth => {
            let z = distance_matrix(&smooth_inputs(&prepared, cfg)?);
            let (w, report) = learn_smooth_graph(&z, &solver)?;
            (w.laplacian(), report)
        }
    };

    let weights = laplacian.weights();
    let threshold = cfg.edge_threshold * weights.max_weight();
    io::write_laplacian(&out_path(cfg, "laplacian.csv"), &laplacian, &tickers)?;
    let n_edges = io::write_edges(&out_path(cfg, "edges.csv"), &weights, threshold)?;
    let spectrum = spectral_summary(&laplacian, None);
    let mut details = json!({
        "method": method,
        "p": tickers.len(),
        "n": prepared.assets.n(),
        "tickers": tickers,
        "nullity": spectrum.nullity,
        "algebraic_connectivity": spectrum.algebraic_connectivity,
        "spectral_radius": spectrum.spectral_radius,
        "edges_written": n_edges,
        "edge_threshold_absolute": threshold,
    });
    if let (Value::Object(d), Value::Object(r)) = (&mut details, report_json(&report)) {
        d.extend(r);
    }
    io::write_json(
        &out_path(cfg, "meta.json"),
        &meta("learn", cfg, started, report.converged, details),
    )?;
    log::info!(
        "learn: {} nodes, {n_edges} edges, nullity {}, converged {}",
        laplacian.p(),
        spectrum.nullity,
        report.converged
    );
    Ok(Outcome {
        converged: report.converged,
    })
}

fn write_indicators(path: &Path, ind: &IndicatorSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "lambda2", "lambda_max", "consistency"])?;
    for t in 0..ind.len() {
        let consistency = if t == 0 {
            String::new()
        } else {
            io::fmt_f64(ind.time_consistency[t - 1])
        };
        w.write_record([
            ind.dates[t].to_string(),
            io::fmt_f64(ind.algebraic_connectivity[t]),
            io::fmt_f64(ind.spectral_radius[t]),
            consistency,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `indicators.csv` written by `learn-tv` or `indicators`.
pub fn read_indicators(path: &Path) -> Result<IndicatorSeries> {
    let loc = |line: usize| format!("{}:{line}", path.display());
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GraphError::parse(loc(1), format!("missing column '{name}'")))
    };
    let (c_date, c_l2, c_lmax, c_cons) = (col("date")?, col("lambda2")?, col("lambda_max")?, col("consistency")?);
    let mut ind = IndicatorSeries {
        dates: Vec::new(),
        algebraic_connectivity: Vec::new(),
        spectral_radius: Vec::new(),
        time_consistency: Vec::new(),
    };
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| GraphError::parse(loc(line), e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .parse()
                .map_err(|_| GraphError::parse(loc(line), format!("bad number '{}'", &rec[c])))
        };
        let date = NaiveDate::parse_from_str(&rec[c_date], "%Y-%m-%d")
            .map_err(|_| GraphError::parse(loc(line), format!("invalid date '{}'", &rec[c_date])))?;
        ind.dates.push(date);
        ind.algebraic_connectivity.push(num(c_l2)?);
        ind.spectral_radius.push(num(c_lmax)?);
        if k > 0 {
            ind.time_consistency.push(num(c_cons)?);
        }
    }
    if ind.is_empty() {
        return Err(GraphError::parse(path.display().to_string(), "no indicator rows"));
    }
    Ok(ind)
}

struct RollingFit {
    laplacians: Vec<LaplacianMatrix>,
    reports: Vec<SolveReport>,
    start_dates: Vec<NaiveDate>,
    end_dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    assets: ReturnsPanel,
}

fn rolling_fit(cfg: &RunConfig, returns: &ReturnsPanel) -> Result<RollingFit> {
    if cfg.k != 1 {
        return Err(GraphError::invalid(format!(
            "rolling estimation learns connected graphs; k must be 1, got {}",
            cfg.k
        )));
    }
    let opts = cfg.preprocessing();
    let prepared = pipeline::prepare(returns, &opts)?;
    let windows = pipeline::rolling_similarities(&prepared, cfg.window, cfg.stride, &opts)?;
    log::info!(
        "learn-tv: {} windows of {} days",
        windows.similarities.len(),
        cfg.window
    );
    let fit = learn_time_varying(&windows.similarities, &windows.counts, &cfg.solver())?;
    Ok(RollingFit {
        laplacians: fit.laplacians,
        reports: fit.reports,
        start_dates: windows.start_dates,
        end_dates: windows.end_dates,
        tickers: prepared.assets.tickers.clone(),
        assets: prepared.assets,
    })
}

fn laplacian_file(t: usize) -> String {
    format!("laplacians/laplacian_{t:05}.csv")
}

pub fn learn_tv(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let returns = load_returns(cfg)?;
    let fit = rolling_fit(cfg, &returns)?;
    std::fs::create_dir_all(out_path(cfg, "laplacians"))?;

    let mut windows = csv::Writer::from_path(out_path(cfg, "windows.csv"))?;
    windows.write_record(["window", "start_date", "end_date", "file", "converged", "iterations"])?;
    for (t, (l, report)) in fit.laplacians.iter().zip(&fit.reports).enumerate() {
        let file = laplacian_file(t);
        io::write_laplacian(&out_path(cfg, &file), l, &fit.tickers)?;
        windows.write_record([
            t.to_string(),
            fit.start_dates[t].to_string(),
            fit.end_dates[t].to_string(),
            file,
            report.converged.to_string(),
            report.iterations.to_string(),
        ])?;
    }
    windows.flush()?;

    let indicators = compute_indicators(&fit.laplacians, &fit.end_dates)?;
    write_indicators(&out_path(cfg, "indicators.csv"), &indicators)?;

    let unconverged: Vec<usize> = (0..fit.reports.len()).filter(|&t| !fit.reports[t].converged).collect();
    let converged = unconverged.is_empty();
    let details = json!({
        "p": fit.tickers.len(),
        "n": returns.n(),
        "tickers": fit.tickers,
        "windows": fit.laplacians.len(),
        "unconverged_windows": unconverged,
        "max_kkt_residual": fit.reports.iter().map(|r| r.kkt_residual).fold(0.0, f64::max),
    });
    io::write_json(
        &out_path(cfg, "meta.json"),
        &meta("learn-tv", cfg, started, converged, details),
    )?;
    Ok(Outcome { converged })
}

pub fn indicators(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let dir = existing_input(cfg)?;
    if !dir.is_dir() {
        return Err(GraphError::invalid(format!("{} is not a directory", dir.display())));
    }
    let index = dir.join("windows.csv");
    if !index.exists() {
        return Err(GraphError::invalid(format!(
            "{} has no windows.csv; point --input at a learn-tv output directory",
            dir.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&index)?;
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GraphError::parse(format!("{}:1", index.display()), format!("missing column '{name}'")))
    };
    let (c_date, c_file) = (col("end_date")?, col("file")?);
    let mut laplacians = Vec::new();
    let mut dates = Vec::new();
    let mut labels: Option<Vec<String>> = None;
    for (k, rec) in reader.records().enumerate() {
        let loc = format!("{}:{}", index.display(), k + 2);
        let rec = rec.map_err(|e| GraphError::parse(loc.clone(), e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec[c_date], "%Y-%m-%d")
            .map_err(|_| GraphError::parse(loc.clone(), format!("invalid date '{}'", &rec[c_date])))?;
        let file = dir.join(&rec[c_file]);
        if !file.exists() {
            return Err(GraphError::invalid(format!(
                "missing Laplacian file {}",
                file.display()
            )));
        }
        let (l, names) = io::read_laplacian(&file)?;
        match &labels {
            Some(first) if *first != names => {
                return Err(GraphError::parse(
                    file.display().to_string(),
                    "tickers differ from the first window",
                ))
            }
            Some(_) => {}
            None => labels = Some(names),
        }
        laplacians.push(l);
        dates.push(date);
    }
    if laplacians.is_empty() {
        return Err(GraphError::invalid(format!(
            "no Laplacians listed in {}",
            index.display()
        )));
    }
    let ind = compute_indicators(&laplacians, &dates)?;
    write_indicators(&out_path(cfg, "indicators.csv"), &ind)?;
    let details = json!({ "windows": ind.len(), "source": dir });
    io::write_json(
        &out_path(cfg, "meta.json"),
        &meta("indicators", cfg, started, true, details),
    )?;
    Ok(Outcome { converged: true })
}

pub fn backtest(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let returns = load_returns(cfg)?;
    let (assets, ind, converged) = match &cfg.indicators {
        Some(path) => {
            if !path.exists() {
                return Err(GraphError::invalid(format!(
                    "indicators file {} does not exist",
                    path.display()
                )));
            }
            let assets = pipeline::prepare(&returns, &cfg.preprocessing())?.assets;
            (assets, read_indicators(path)?, true)
        }
        None => {
            let fit = rolling_fit(cfg, &returns)?;
            let converged = fit.reports.iter().all(|r| r.converged);
            let ind = compute_indicators(&fit.laplacians, &fit.end_dates)?;
            (fit.assets, ind, converged)
        }
    };
    let direction = if cfg.invert_gate {
        GateDirection::InvestAbove
    } else {
        GateDirection::InvestBelow
    };
    let span = evaluation_span(&assets, &ind)?;
    let offset = assets
        .dates
        .iter()
        .position(|d| *d == span.dates[0])
        .expect("span is a slice of the panel");
    // The gated strategy is flat before the span, so its cumulative PnL over
    // the full panel restricted to the span equals accumulation from the
    // span start.
    let s2 = strategy_s2(&assets, &ind, cfg.tau, direction)?;
    let s1 = strategy_s1(&span);

    let mut w = csv::Writer::from_path(out_path(cfg, "pnl.csv"))?;
    w.write_record(["date", "s1_cum", "s2_cum", "position"])?;
    for (t, d) in span.dates.iter().enumerate() {
        w.write_record([
            d.to_string(),
            io::fmt_f64(s1.cumulative_pnl[t]),
            io::fmt_f64(s2.cumulative_pnl[offset + t]),
            s2.positions[offset + t].to_string(),
        ])?;
    }
    w.flush()?;
    let invested = s2.positions[offset..offset + span.n()]
        .iter()
        .filter(|p| **p == 1.0)
        .count();
    let details = json!({
        "days": span.n(),
        "first_day": span.dates[0],
        "last_day": span.dates[span.n() - 1],
        "days_invested": invested,
        "gate": direction,
        "s1_total": s1.cumulative_pnl.last(),
        "s2_total": s2.cumulative_pnl.last(),
        "indicator_source": cfg.indicators.as_ref().map_or(Value::from("computed"), |p| json!(p)),
    });
    io::write_json(
        &out_path(cfg, "meta.json"),
        &meta("backtest", cfg, started, converged, details),
    )?;
    Ok(Outcome { converged })
}

/// `days:corr,days:corr,...`
fn parse_regimes(text: &str) -> Result<Vec<Regime>> {
    text.split(',')
        .map(|part| {
            let bad = || GraphError::invalid(format!("regime '{part}' is not `days:residual_corr`"));
            let (len, corr) = part.trim().split_once(':').ok_or_else(bad)?;
            Ok(Regime {
                len: len.trim().parse().map_err(|_| bad())?,
                residual_corr: corr.trim().parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Prices starting at 100 whose log-returns are exactly `r` up to rounding.
fn prices_from_returns(r: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = r.shape();
    let mut prices = DMatrix::from_element(n + 1, p, 100.0);
    for t in 0..n {
        for i in 0..p {
            prices[(t + 1, i)] = prices[(t, i)] * r[(t, i)].exp();
        }
    }
    prices
}

/// Writes `returns` as prices.csv or returns.csv; returns the dates at which
/// each return row is observed.
fn write_synthetic_panel(cfg: &RunConfig, labels: &[String], r: &DMatrix<f64>) -> Result<(PathBuf, Vec<NaiveDate>)> {
    let n = r.nrows();
    match cfg.input_format {
        InputFormat::Prices => {
            let dates = synthetic_dates(n + 1);
            let path = out_path(cfg, "prices.csv");
            io::write_panel(&path, &dates, labels, &prices_from_returns(r))?;
            Ok((path, dates[1..].to_vec()))
        }
        InputFormat::Returns => {
            let dates = synthetic_dates(n);
            let path = out_path(cfg, "returns.csv");
            io::write_panel(&path, &dates, labels, r)?;
            Ok((path, dates))
        }
    }
}

pub fn synth(cfg: &RunConfig) -> Result<Outcome> {
    let started = Instant::now();
    let details = match cfg.kind {
        SynthKind::Gmrf => {
            let p = cfg.p.unwrap_or(SYNTH_GMRF_P);
            let n = cfg.n.unwrap_or(SYNTH_GMRF_N);
            let planted = random_k_component_graph(p, cfg.k, SYNTH_WEIGHT_RANGE, cfg.seed)?;
            let x = sample_gmrf(&planted.laplacian, n, cfg.seed.wrapping_add(1))?;
            let (path, _) = write_synthetic_panel(cfg, &x.tickers, &x.returns)?;
            io::write_laplacian(&out_path(cfg, "truth_laplacian.csv"), &planted.laplacian, &x.tickers)?;
            let truth = json!({
                "kind": "gmrf",
                "p": p,
                "n": n,
                "k": planted.k,
                "nullity": spectral_summary(&planted.laplacian, None).nullity,
                "groups": planted.groups,
                "edges": planted.edges.iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>(),
                "weight_range": SYNTH_WEIGHT_RANGE,
            });
            io::write_json(&out_path(cfg, "truth.json"), &truth)?;
            json!({ "panel": path, "truth": truth })
        }
        SynthKind::Factor => {
            let mut spec = FactorMarketSpec::default();
            if let Some(p) = cfg.p {
                spec.p = p;
            }
            match (&cfg.regimes, cfg.n) {
                (Some(text), _) => spec.regimes = parse_regimes(text)?,
                (None, Some(n)) => {
                    let first = n / 2;
                    spec.regimes[0].len = first;
                    spec.regimes[1].len = n - first;
                }
                (None, None) => {}
            }
            let fm = simulate_factor_market(&spec, cfg.seed)?;
            let mut labels = fm.returns.tickers.clone();
            labels.push(MARKET_TICKER.to_owned());
            let mut r = fm.returns.returns.clone().insert_column(fm.returns.p(), 0.0);
            r.column_mut(fm.returns.p()).copy_from_slice(&fm.market);
            let (path, return_dates) = write_synthetic_panel(cfg, &labels, &r)?;
            let truth = json!({
                "kind": "factor",
                "spec": spec,
                "market_column": MARKET_TICKER,
                "betas": fm.betas,
                "regime_starts": fm.regime_starts,
                "regime_start_dates": fm.regime_starts.iter().map(|&s| return_dates[s]).collect::<Vec<_>>(),
            });
            io::write_json(&out_path(cfg, "truth.json"), &truth)?;
            json!({ "panel": path, "truth": truth })
        }
    };
    io::write_json(&out_path(cfg, "meta.json"), &meta("synth", cfg, started, true, details))?;
    Ok(Outcome { converged: true })
}
