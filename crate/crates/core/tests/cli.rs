//! End-to-end runs of the `graphlearn` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

use graphlearn::analytics::mean_shift_change_point;
use graphlearn::cli::io::read_laplacian;
use graphlearn::graphcore::spectral_summary;
use graphlearn::synth::{score_recovery, PlantedGraph};

const BIN: &str = env!("CARGO_BIN_EXE_graphlearn");

struct Run {
    code: i32,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exited normally"),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) {
    let r = run(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

/// A synthetic GMRF panel (prices) in a fresh directory.
fn gmrf_panel(k: usize, p: usize, n: usize, seed: u64) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "synth",
        "--kind",
        "gmrf",
        "--k",
        &k.to_string(),
        "--p",
        &p.to_string(),
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--output-dir",
        s(dir.path()),
    ]);
    let prices = dir.path().join("prices.csv");
    (dir, prices)
}

/// A factor-market panel with two regimes of `first` and `second` return days.
fn factor_panel(first: usize, second: usize, seed: u64) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let regimes = format!("{first}:0.05,{second}:0.6");
    ok(&[
        "synth",
        "--kind",
        "factor",
        "--regimes",
        &regimes,
        "--seed",
        &seed.to_string(),
        "--output-dir",
        s(dir.path()),
    ]);
    let prices = dir.path().join("prices.csv");
    (dir, prices)
}

fn planted_from_truth(dir: &Path) -> PlantedGraph {
    let truth = read_json(&dir.join("truth.json"));
    let (laplacian, _) = read_laplacian(&dir.join("truth_laplacian.csv")).unwrap();
    PlantedGraph {
        laplacian,
        k: truth["k"].as_u64().unwrap() as usize,
        edges: truth["edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e[0].as_u64().unwrap() as usize, e[1].as_u64().unwrap() as usize))
            .collect(),
        groups: truth["groups"]
            .as_array()
            .unwrap()
            .iter()
            .map(|g| g.as_u64().unwrap() as usize)
            .collect(),
    }
}

#[test]
fn learn_writes_a_connected_graph() {
    let (data, prices) = gmrf_panel(1, 8, 800, 3);
    let out = data.path().join("out");
    ok(&["learn", "--input", s(&prices), "--output-dir", s(&out)]);
    assert!(data_rows(&out.join("edges.csv")) > 0);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["converged"], true);
    assert_eq!(meta["command"], "learn");
    assert_eq!(meta["nullity"], 1);
    let (l, tickers) = read_laplacian(&out.join("laplacian.csv")).unwrap();
    assert_eq!(tickers.len(), 8);
    assert_eq!(spectral_summary(&l, None).nullity, 1);
    let header = fs::read_to_string(out.join("edges.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "i,j,weight");
}

#[test]
fn correlation_scale_ignores_rescaled_columns() {
    let (data, prices) = gmrf_panel(1, 6, 600, 5);
    // Multiply every price in one column by 10 and square another column's
    // growth: log-returns are shifted (no effect) and doubled (variance x4).
    let text = fs::read_to_string(&prices).unwrap();
    let mut lines = text.lines();
    let mut rescaled = String::from(lines.next().unwrap());
    rescaled.push('\n');
    for line in lines {
        let mut cells: Vec<String> = line.split(',').map(str::to_owned).collect();
        let a: f64 = cells[1].parse().unwrap();
        let b: f64 = cells[2].parse().unwrap();
        cells[1] = format!("{:.17e}", a * 10.0);
        cells[2] = format!("{:.17e}", 100.0 * (b / 100.0).powi(2));
        rescaled.push_str(&cells.join(","));
        rescaled.push('\n');
    }
    let other = data.path().join("rescaled.csv");
    fs::write(&other, rescaled).unwrap();
    let (a, b) = (data.path().join("a"), data.path().join("b"));
    ok(&[
        "learn",
        "--input",
        s(&prices),
        "--output-dir",
        s(&a),
        "--scale",
        "correlation",
    ]);
    ok(&[
        "learn",
        "--input",
        s(&other),
        "--output-dir",
        s(&b),
        "--scale",
        "correlation",
    ]);
    let edges = |dir: &Path| -> BTreeSet<(usize, usize)> {
        fs::read_to_string(dir.join("edges.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect()
    };
    assert_eq!(edges(&a), edges(&b));
    let (la, _) = read_laplacian(&a.join("laplacian.csv")).unwrap();
    let (lb, _) = read_laplacian(&b.join("laplacian.csv")).unwrap();
    let scale = la.matrix().amax();
    assert!((la.matrix() - lb.matrix()).amax() <= 1e-6 * scale);
}

#[test]
fn k_component_learning_recovers_the_planted_graph() {
    let (data, prices) = gmrf_panel(3, 30, 3000, 11);
    let out = data.path().join("out");
    ok(&["learn", "--input", s(&prices), "--output-dir", s(&out), "--k", "3"]);
    let meta = read_json(&out.join("meta.json"));
    assert_eq!(meta["nullity"], 3);
    assert_eq!(meta["method"], "k-component");
    let (l, _) = read_laplacian(&out.join("laplacian.csv")).unwrap();
    assert_eq!(spectral_summary(&l, None).nullity, 3);
    let planted = planted_from_truth(data.path());
    let score = score_recovery(&l, &planted, None).unwrap();
    assert!(score.f_score >= 0.9, "{score:?}");
}

#[test]
fn synth_is_deterministic_and_consistent_with_its_truth() {
    let (a, pa) = gmrf_panel(2, 10, 200, 42);
    let (b, pb) = gmrf_panel(2, 10, 200, 42);
    assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    assert_eq!(
        fs::read(a.path().join("truth_laplacian.csv")).unwrap(),
        fs::read(b.path().join("truth_laplacian.csv")).unwrap()
    );
    let (c, pc) = gmrf_panel(2, 10, 200, 43);
    assert_ne!(fs::read(&pa).unwrap(), fs::read(&pc).unwrap());

    let planted = planted_from_truth(a.path());
    assert_eq!(spectral_summary(&planted.laplacian, None).nullity, 2);
    assert_eq!(read_json(&a.path().join("truth.json"))["nullity"], 2);
    let own = score_recovery(&planted.laplacian, &planted, None).unwrap();
    assert_eq!(own.f_score, 1.0);
    assert_eq!(own.relative_error, 0.0);
    // Price panel has one more row than return days.
    assert_eq!(data_rows(&pa), 201);
    drop(c);
}

#[test]
fn learn_tv_window_arithmetic() {
    // 229 returns = 230 price days -> 200 windows of 30.
    let (data, prices) = factor_panel(115, 114, 1);
    assert_eq!(data_rows(&prices), 230);
    let out = data.path().join("tv");
    ok(&[
        "learn-tv",
        "--input",
        s(&prices),
        "--output-dir",
        s(&out),
        "--market",
        "remove",
        "--market-column",
        "MKT",
    ]);
    assert_eq!(data_rows(&out.join("indicators.csv")), 200);
    assert_eq!(data_rows(&out.join("windows.csv")), 200);
    assert_eq!(fs::read_dir(out.join("laplacians")).unwrap().count(), 200);
    assert_eq!(read_json(&out.join("meta.json"))["windows"], 200);
    let header = fs::read_to_string(out.join("indicators.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "date,lambda2,lambda_max,consistency");

    // 31 price days = 30 returns -> exactly one window; 32 -> two.
    let (short, _) = factor_panel(15, 16, 2);
    let full = fs::read_to_string(short.path().join("prices.csv")).unwrap();
    for (days, windows) in [(31usize, 1usize), (32, 2)] {
        let cut: Vec<&str> = full.lines().take(days + 1).collect();
        let file = short.path().join(format!("p{days}.csv"));
        fs::write(&file, cut.join("\n") + "\n").unwrap();
        let out = short.path().join(format!("tv{days}"));
        ok(&[
            "learn-tv",
            "--input",
            s(&file),
            "--output-dir",
            s(&out),
            "--market-column",
            "MKT",
        ]);
        assert_eq!(data_rows(&out.join("indicators.csv")), windows);
    }
    // 30 price days leave 29 returns: not enough for one window.
    let cut: Vec<&str> = full.lines().take(31).collect();
    let file = short.path().join("p30.csv");
    fs::write(&file, cut.join("\n") + "\n").unwrap();
    let r = run(&[
        "learn-tv",
        "--input",
        s(&file),
        "--output-dir",
        s(&short.path().join("tv30")),
        "--market-column",
        "MKT",
    ]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn indicators_recompute_bitwise_and_validate_input() {
    let (data, prices) = factor_panel(30, 30, 4);
    let tv = data.path().join("tv");
    ok(&[
        "learn-tv",
        "--input",
        s(&prices),
        "--output-dir",
        s(&tv),
        "--market-column",
        "MKT",
        "--market",
        "remove",
    ]);
    let again = data.path().join("again");
    ok(&["indicators", "--input", s(&tv), "--output-dir", s(&again)]);
    assert_eq!(
        fs::read(tv.join("indicators.csv")).unwrap(),
        fs::read(again.join("indicators.csv")).unwrap()
    );

    // A single stored Laplacian yields a single row with no consistency value.
    let single = data.path().join("single");
    fs::create_dir_all(single.join("laplacians")).unwrap();
    fs::copy(
        tv.join("laplacians/laplacian_00000.csv"),
        single.join("laplacians/laplacian_00000.csv"),
    )
    .unwrap();
    let index = fs::read_to_string(tv.join("windows.csv")).unwrap();
    fs::write(
        single.join("windows.csv"),
        index.lines().take(2).collect::<Vec<_>>().join("\n") + "\n",
    )
    .unwrap();
    let one = data.path().join("one");
    ok(&["indicators", "--input", s(&single), "--output-dir", s(&one)]);
    let text = fs::read_to_string(one.join("indicators.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(','));

    // No windows listed, no index, missing Laplacian file.
    let empty = data.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    assert_eq!(
        run(&["indicators", "--input", s(&empty), "--output-dir", s(&one)]).code,
        2
    );
    fs::write(
        empty.join("windows.csv"),
        index.lines().next().unwrap().to_owned() + "\n",
    )
    .unwrap();
    assert_eq!(
        run(&["indicators", "--input", s(&empty), "--output-dir", s(&one)]).code,
        2
    );
    fs::remove_file(single.join("laplacians/laplacian_00000.csv")).unwrap();
    assert_eq!(
        run(&["indicators", "--input", s(&single), "--output-dir", s(&one)]).code,
        2
    );
}

fn pnl(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn backtest_columns_and_gates() {
    let (data, prices) = factor_panel(50, 50, 6);
    let tv = data.path().join("tv");
    let common = ["--input", s(&prices), "--market-column", "MKT", "--market", "remove"];
    ok(&[&["learn-tv", "--output-dir", s(&tv)], &common[..]].concat());
    let ind = tv.join("indicators.csv");

    let bt = data.path().join("bt");
    ok(&[
        &["backtest", "--output-dir", s(&bt), "--indicators", s(&ind)],
        &common[..],
    ]
    .concat());
    let header = fs::read_to_string(bt.join("pnl.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "date,s1_cum,s2_cum,position");
    // The first window's indicator gates the next day: 71 windows, 70 traded days.
    let rows = pnl(&bt.join("pnl.csv"));
    assert_eq!(rows.len(), data_rows(&ind) - 1);

    // An infinite threshold keeps the gated strategy invested every day.
    let always = data.path().join("always");
    ok(&[
        &[
            "backtest",
            "--output-dir",
            s(&always),
            "--indicators",
            s(&ind),
            "--tau",
            "inf",
        ],
        &common[..],
    ]
    .concat());
    for row in pnl(&always.join("pnl.csv")) {
        assert_eq!(row[1], row[2]);
        assert_eq!(row[3], "1");
    }
    // Inverting the gate with the same threshold never invests.
    let never = data.path().join("never");
    ok(&[
        &[
            "backtest",
            "--output-dir",
            s(&never),
            "--indicators",
            s(&ind),
            "--tau",
            "inf",
            "--invert-gate",
        ],
        &common[..],
    ]
    .concat());
    for row in pnl(&never.join("pnl.csv")) {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[3], "0");
    }

    // Without --indicators the backtest estimates them itself, identically.
    let inline = data.path().join("inline");
    ok(&[&["backtest", "--output-dir", s(&inline)], &common[..]].concat());
    assert_eq!(
        fs::read(bt.join("pnl.csv")).unwrap(),
        fs::read(inline.join("pnl.csv")).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let (data, prices) = gmrf_panel(3, 9, 1500, 8);
    let conf = data.path().join("run.conf");
    fs::write(
        &conf,
        format!("# settings\ninput = {}\nk = 3\nscale = covariance\n", s(&prices)),
    )
    .unwrap();
    let a = data.path().join("a");
    ok(&["learn", "--config", s(&conf), "--output-dir", s(&a)]);
    assert_eq!(read_json(&a.join("meta.json"))["nullity"], 3);
    let b = data.path().join("b");
    ok(&["learn", "--config", s(&conf), "--output-dir", s(&b), "--k", "1"]);
    let meta = read_json(&b.join("meta.json"));
    assert_eq!(meta["nullity"], 1);
    assert_eq!(meta["config"]["scale"], "covariance");

    fs::write(&conf, "k = 3\nk = 2\n").unwrap();
    let r = run(&[
        "learn",
        "--config",
        s(&conf),
        "--input",
        s(&prices),
        "--output-dir",
        s(&b),
    ]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("run.conf:2"), "{}", r.stderr);
    fs::write(&conf, "bogus = 1\n").unwrap();
    assert_eq!(
        run(&[
            "learn",
            "--config",
            s(&conf),
            "--input",
            s(&prices),
            "--output-dir",
            s(&b)
        ])
        .code,
        2
    );
}

#[test]
fn meta_json_reruns_reproduce_outputs() {
    let (data, prices) = gmrf_panel(1, 7, 500, 9);
    let a = data.path().join("a");
    ok(&[
        "learn",
        "--input",
        s(&prices),
        "--output-dir",
        s(&a),
        "--scale",
        "covariance",
        "--alpha",
        "0.01",
    ]);
    let b = data.path().join("b");
    ok(&["learn", "--config", s(&a.join("meta.json")), "--output-dir", s(&b)]);
    assert_eq!(
        fs::read(a.join("laplacian.csv")).unwrap(),
        fs::read(b.join("laplacian.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("edges.csv")).unwrap(),
        fs::read(b.join("edges.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let (data, prices) = gmrf_panel(1, 6, 300, 10);
    let out = data.path().join("out");
    // Validation errors.
    assert_eq!(
        run(&["learn", "--input", s(&prices), "--output-dir", s(&out), "--k", "6"]).code,
        2
    );
    assert_eq!(
        run(&[
            "learn",
            "--input",
            s(&data.path().join("nope.csv")),
            "--output-dir",
            s(&out)
        ])
        .code,
        2
    );
    assert_eq!(
        run(&["learn", "--input", s(&prices), "--output-dir", s(&out), "--eta", "-1"]).code,
        2
    );
    assert_eq!(run(&["learn", "--bogus"]).code, 2);
    assert_eq!(
        run(&["learn-tv", "--input", s(&prices), "--output-dir", s(&out), "--k", "2"]).code,
        2
    );
    // Starved of iterations: artifacts are still written, exit code 3.
    let starved = data.path().join("starved");
    let r = run(&[
        "learn",
        "--input",
        s(&prices),
        "--output-dir",
        s(&starved),
        "--max-outer-iters",
        "1",
        "--max-inner-iters",
        "1",
    ]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(starved.join("laplacian.csv").exists());
    assert_eq!(read_json(&starved.join("meta.json"))["converged"], false);
}

#[test]
fn missing_cells_and_duplicate_dates() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("date,A,B,C\n");
    let mut state: u64 = 7;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        100.0 + ((state >> 33) as f64 / (1u64 << 31) as f64)
    };
    for d in 1..=60 {
        let (a, b, c) = (next(), next(), next());
        let (month, day) = (1 + (d - 1) / 28, 1 + (d - 1) % 28);
        let b = if d == 20 { String::new() } else { b.to_string() };
        text.push_str(&format!("2024-{month:02}-{day:02},{a},{b},{c}\n"));
    }
    let path = dir.path().join("gappy.csv");
    fs::write(&path, &text).unwrap();
    let (dropped, filled) = (dir.path().join("drop"), dir.path().join("fill"));
    ok(&["learn", "--input", s(&path), "--output-dir", s(&dropped)]);
    ok(&["learn", "--input", s(&path), "--output-dir", s(&filled), "--ffill"]);
    assert_eq!(read_json(&dropped.join("meta.json"))["n"], 58);
    assert_eq!(read_json(&filled.join("meta.json"))["n"], 59);

    let dup = dir.path().join("dup.csv");
    fs::write(
        &dup,
        "date,A,B\n2024-01-02,1,2\n2024-01-03,1.1,2.1\n2024-01-03,1.2,2.2\n2024-01-04,1.3,2.0\n",
    )
    .unwrap();
    let r = run(&["learn", "--input", s(&dup), "--output-dir", s(&dir.path().join("d"))]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("dup.csv"), "{}", r.stderr);
}

#[test]
fn connectivity_change_point_tracks_the_regime_switch() {
    let (data, prices) = factor_panel(115, 115, 0);
    let truth = read_json(&data.path().join("truth.json"));
    let boundary = truth["regime_starts"][1].as_u64().unwrap() as usize;
    let tv = data.path().join("tv");
    ok(&[
        "learn-tv",
        "--input",
        s(&prices),
        "--output-dir",
        s(&tv),
        "--market-column",
        "MKT",
        "--market",
        "remove",
    ]);
    let l2: Vec<f64> = fs::read_to_string(tv.join("indicators.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let cp = mean_shift_change_point(&l2).unwrap();
    assert!(cp.abs_diff(boundary) <= 5, "change point {cp} vs {boundary}");
}
