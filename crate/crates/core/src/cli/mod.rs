//! Command-line front end.
//!
//! Settings are resolved in three layers: built-in defaults, then the
//! `--config` file, then flags given on the command line.
//!
//! Exit codes: 0 success, 1 I/O failure while writing, 2 invalid input or
//! parameters, 3 a solver did not converge (artifacts are still written).

mod commands;
pub mod config;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::GraphError;
use crate::preprocess::SimilarityKind;
use config::{InputFormat, Method, RunConfig, SynthKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "graphlearn",
    version,
    about = "Learn Laplacian-constrained graphs from financial returns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate one graph from a price or returns panel.
    Learn(Common),
    /// Estimate a causal sequence of graphs over rolling windows.
    LearnTv(Common),
    /// Compare equal-weight and connectivity-gated strategies.
    Backtest(Common),
    /// Write a synthetic panel and its ground truth.
    Synth(Common),
    /// Recompute indicators from stored Laplacians.
    Indicators(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ScaleArg {
    Covariance,
    Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MarketArg {
    Keep,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Auto,
    Mle,
    Smooth,
    KComponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum FormatArg {
    Prices,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum KindArg {
    Gmrf,
    Factor,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Args)]
struct Common {
    /// Input panel (learn, learn-tv, backtest) or learn-tv output directory (indicators).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// `key = value` settings file, or a meta.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    input_format: Option<FormatArg>,
    /// Forward-fill blank cells instead of dropping the row.
    #[arg(long)]
    ffill: bool,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    #[arg(long, value_enum)]
    market: Option<MarketArg>,
    /// Column holding the market index; never treated as an asset.
    #[arg(long)]
    market_column: Option<String>,
    /// Fit the market regression without an intercept.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Invest while connectivity is at or above tau instead of below it.
    #[arg(long)]
    invert_gate: bool,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    memory: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    #[arg(long)]
    max_inner_iters: Option<usize>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    outer_tol: Option<f64>,
    /// Edges below this fraction of the largest weight are left out of edges.csv.
    #[arg(long)]
    edge_threshold: Option<f64>,
    /// indicators.csv to gate the backtest with (computed from --input when absent).
    #[arg(long)]
    indicators: Option<PathBuf>,
    /// Synthetic generator.
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Number of synthetic assets.
    #[arg(long)]
    p: Option<usize>,
    /// Number of synthetic return days.
    #[arg(long)]
    n: Option<usize>,
    /// Factor-market regimes as `days:residual_corr,...`.
    #[arg(long)]
    regimes: Option<String>,
}

impl Common {
    fn resolve(&self) -> crate::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        take!(k, eta, alpha, gamma, delta, tau, window, stride, memory, seed);
        take!(max_outer_iters, max_inner_iters, inner_tol, outer_tol, edge_threshold);
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.market_column {
            cfg.market_column = Some(v.clone());
        }
        if let Some(v) = &self.indicators {
            cfg.indicators = Some(v.clone());
        }
        if let Some(v) = &self.regimes {
            cfg.regimes = Some(v.clone());
        }
        if self.p.is_some() {
            cfg.p = self.p;
        }
        if self.n.is_some() {
            cfg.n = self.n;
        }
        if self.ffill {
            cfg.ffill = true;
        }
        if self.invert_gate {
            cfg.invert_gate = true;
        }
        if self.no_intercept {
            cfg.intercept = false;
        }
        if let Some(v) = self.input_format {
            cfg.input_format = match v {
                FormatArg::Prices => InputFormat::Prices,
                FormatArg::Returns => InputFormat::Returns,
            };
        }
        if let Some(v) = self.scale {
            cfg.scale = match v {
                ScaleArg::Covariance => SimilarityKind::Covariance,
                ScaleArg::Correlation => SimilarityKind::Correlation,
            };
        }
        if let Some(v) = self.market {
            cfg.market = match v {
                MarketArg::Keep => crate::pipeline::MarketTreatment::Keep,
                MarketArg::Remove => crate::pipeline::MarketTreatment::Remove,
            };
        }
        if let Some(v) = self.method {
            cfg.method = match v {
                MethodArg::Auto => Method::Auto,
                MethodArg::Mle => Method::Mle,
                MethodArg::Smooth => Method::Smooth,
                MethodArg::KComponent => Method::KComponent,
            };
        }
        if let Some(v) = self.kind {
            cfg.kind = match v {
                KindArg::Gmrf => SynthKind::Gmrf,
                KindArg::Factor => SynthKind::Factor,
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// What a finished command reports back for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub converged: bool,
}

fn exit_code(err: &GraphError) -> i32 {
    match err {
        GraphError::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = match &cli.command {
        Command::Learn(c) => ("learn", c),
        Command::LearnTv(c) => ("learn-tv", c),
        Command::Backtest(c) => ("backtest", c),
        Command::Synth(c) => ("synth", c),
        Command::Indicators(c) => ("indicators", c),
    };
    let result = common.resolve().and_then(|cfg| {
        std::fs::create_dir_all(&cfg.output_dir)?;
        match &cli.command {
            Command::Learn(_) => commands::learn(&cfg),
            Command::LearnTv(_) => commands::learn_tv(&cfg),
            Command::Backtest(_) => commands::backtest(&cfg),
            Command::Synth(_) => commands::synth(&cfg),
            Command::Indicators(_) => commands::indicators(&cfg),
        }
    });
    match result {
        Ok(Outcome { converged: true }) => EXIT_OK,
        Ok(Outcome { converged: false }) => {
            eprintln!("graphlearn {name}: solver did not converge; results written with converged = false");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            eprintln!("graphlearn {name}: {e}");
            exit_code(&e)
        }
    }
}
