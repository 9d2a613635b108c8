//! Run configuration: defaults, then a `key = value` file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::DEFAULT_TAU;
use crate::error::{GraphError, Result};
use crate::pipeline::{MarketTreatment, Preprocessing};
use crate::preprocess::SimilarityKind;
use crate::solvers::{EtaSchedule, SolverConfig};

/// Estimator used by `learn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `k-component` when `k > 1`, otherwise `mle`.
    #[default]
    Auto,
    Mle,
    Smooth,
    KComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Samples from a planted k-component graph.
    #[default]
    Gmrf,
    /// Single-factor market with regime-dependent residual correlation.
    Factor,
}

/// Every setting a subcommand may read, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub input_format: InputFormat,
    pub ffill: bool,
    pub scale: SimilarityKind,
    pub market: MarketTreatment,
    pub market_column: Option<String>,
    pub intercept: bool,
    pub method: Method,
    pub k: usize,
    pub eta: f64,
    pub eta_schedule: EtaSchedule,
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub memory: usize,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub tau: f64,
    pub invert_gate: bool,
    pub window: usize,
    pub stride: usize,
    /// Edges below this fraction of the largest weight are not listed.
    pub edge_threshold: f64,
    pub indicators: Option<PathBuf>,
    pub seed: u64,
    pub kind: SynthKind,
    pub p: Option<usize>,
    pub n: Option<usize>,
    /// `len:corr,len:corr,...` for the factor market.
    pub regimes: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            input: None,
            output_dir: PathBuf::from("."),
            input_format: InputFormat::Prices,
            ffill: false,
            scale: SimilarityKind::Correlation,
            market: MarketTreatment::Keep,
            market_column: None,
            intercept: true,
            method: Method::Auto,
            k: solver.k,
            eta: solver.eta,
            eta_schedule: solver.eta_schedule,
            alpha: solver.alpha,
            gamma: solver.gamma,
            delta: solver.delta,
            memory: solver.memory,
            max_outer_iters: solver.max_outer_iters,
            max_inner_iters: solver.max_inner_iters,
            inner_tol: solver.inner_tol,
            outer_tol: solver.outer_tol,
            tau: DEFAULT_TAU,
            invert_gate: false,
            window: 30,
            stride: 1,
            edge_threshold: 1e-4,
            indicators: None,
            seed: solver.seed,
            kind: SynthKind::Gmrf,
            p: None,
            n: None,
            regimes: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| GraphError::invalid(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(GraphError::invalid(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

/// Parses enum values through their serde names (`covariance`, `k-component`, ...).
fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_ascii_lowercase()))
        .map_err(|_| GraphError::invalid(format!("invalid value '{value}' for '{key}'")))
}

impl RunConfig {
    /// Applies one setting; `key` uses flag spelling (`market-column`), with
    /// underscores accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "input" => self.input = Some(PathBuf::from(value)),
            "output-dir" => self.output_dir = PathBuf::from(value),
            "input-format" => self.input_format = parse_enum(k, value)?,
            "ffill" => self.ffill = parse_bool(k, value)?,
            "scale" => self.scale = parse_enum(k, value)?,
            "market" => self.market = parse_enum(k, value)?,
            "market-column" => self.market_column = Some(value.to_owned()),
            "intercept" => self.intercept = parse_bool(k, value)?,
            "method" => self.method = parse_enum(k, value)?,
            "k" => self.k = parse_value(k, value)?,
            "eta" => self.eta = parse_value(k, value)?,
            "eta-schedule" => self.eta_schedule = parse_enum(k, value)?,
            "alpha" => self.alpha = parse_value(k, value)?,
            "gamma" => self.gamma = parse_value(k, value)?,
            "delta" => self.delta = parse_value(k, value)?,
            "memory" => self.memory = parse_value(k, value)?,
            "max-outer-iters" => self.max_outer_iters = parse_value(k, value)?,
            "max-inner-iters" => self.max_inner_iters = parse_value(k, value)?,
            "inner-tol" => self.inner_tol = parse_value(k, value)?,
            "outer-tol" => self.outer_tol = parse_value(k, value)?,
            "tau" => self.tau = parse_value(k, value)?,
            "invert-gate" => self.invert_gate = parse_bool(k, value)?,
            "window" => self.window = parse_value(k, value)?,
            "stride" => self.stride = parse_value(k, value)?,
            "edge-threshold" => self.edge_threshold = parse_value(k, value)?,
            "indicators" => self.indicators = Some(PathBuf::from(value)),
            "seed" => self.seed = parse_value(k, value)?,
            "kind" => self.kind = parse_enum(k, value)?,
            "p" => self.p = Some(parse_value(k, value)?),
            "n" => self.n = Some(parse_value(k, value)?),
            "regimes" => self.regimes = Some(value.to_owned()),
            _ => return Err(GraphError::invalid(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every line of a config file. A `meta.json` written by a
    /// previous run is accepted too: its `config` object replaces the
    /// current settings.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            let meta: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| GraphError::parse(path.display().to_string(), e.to_string()))?;
            let config = meta.get("config").cloned().unwrap_or(meta);
            *self = serde_json::from_value(config)
                .map_err(|e| GraphError::parse(path.display().to_string(), e.to_string()))?;
            return Ok(());
        }
        for (key, value, line) in
            parse_config(&text).map_err(|(line, msg)| GraphError::parse(format!("{}:{line}", path.display()), msg))?
        {
            self.set(&key, &value)
                .map_err(|e| GraphError::parse(format!("{}:{line}", path.display()), e.to_string()))?;
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_outer_iters: self.max_outer_iters,
            max_inner_iters: self.max_inner_iters,
            inner_tol: self.inner_tol,
            outer_tol: self.outer_tol,
            eta: self.eta,
            eta_schedule: self.eta_schedule,
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
            k: self.k,
            memory: self.memory,
            seed: self.seed,
        }
    }

    pub fn preprocessing(&self) -> Preprocessing {
        Preprocessing {
            scale: self.scale,
            market: self.market,
            market_column: self.market_column.clone(),
            intercept: self.intercept,
        }
    }

    /// Checks that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(GraphError::invalid(format!(
                "window must be at least 2, got {}",
                self.window
            )));
        }
        if self.stride < 1 {
            return Err(GraphError::invalid("stride must be at least 1"));
        }
        if !(self.edge_threshold >= 0.0) {
            return Err(GraphError::invalid("edge-threshold must be nonnegative"));
        }
        if self.tau.is_nan() {
            return Err(GraphError::invalid("tau must be a number"));
        }
        Ok(())
    }

    pub fn input_path(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| GraphError::invalid("--input is required"))
    }
}

/// One `key = value` setting and its 1-based line number.
type Setting = (String, String, usize);

/// `key = value` lines; `#` starts a comment. Errors carry the line number.
fn parse_config(text: &str) -> std::result::Result<Vec<Setting>, (usize, String)> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err((line, format!("expected `key = value`, found '{content}'")));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err((line, "empty key".into()));
        }
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err((line, format!("'{key}' already set on line {first}")));
        }
        out.push((key, value.trim().to_owned(), line));
    }
    Ok(out)
}
