//! File formats: panel CSVs in, matrix/edge/series CSVs and JSON out.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use crate::error::{GraphError, Result};
use crate::graphcore::{GraphWeights, LaplacianMatrix};
use crate::preprocess::{PricePanel, ReturnsPanel};

/// A dated panel as read from disk, before any interpretation as prices or
/// returns.
#[derive(Debug, Clone)]
pub struct RawPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    pub values: DMatrix<f64>,
    /// Data rows in the file.
    pub rows_read: usize,
    /// Rows dropped for missing values.
    pub rows_dropped: usize,
    /// Cells filled from the previous row.
    pub cells_filled: usize,
}

/// How to treat blank cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    DropRow,
    ForwardFill,
}

/// Reads `date,<ticker>,...` with ISO dates and numeric cells.
///
/// Rows are numbered as lines of the file (the header is line 1).
pub fn read_panel(path: &Path, missing: MissingPolicy) -> Result<RawPanel> {
    let loc = |line: usize| format!("{}:{line}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("date") {
        return Err(GraphError::parse(loc(1), "header must be `date,<ticker>,...`"));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    for (i, t) in tickers.iter().enumerate() {
        if t.is_empty() {
            return Err(GraphError::parse(
                loc(1),
                format!("empty ticker name in column {}", i + 2),
            ));
        }
        if tickers[..i].contains(t) {
            return Err(GraphError::parse(loc(1), format!("duplicate ticker '{t}'")));
        }
    }
    let p = tickers.len();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last_date: Option<(NaiveDate, usize)> = None;
    let mut prev: Option<Vec<f64>> = None;
    let (mut rows_read, mut rows_dropped, mut cells_filled) = (0, 0, 0);

    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| GraphError::parse(loc(line), e.to_string()))?;
        rows_read += 1;
        if record.len() != p + 1 {
            return Err(GraphError::parse(
                loc(line),
                format!("expected {} fields, found {}", p + 1, record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|_| GraphError::parse(loc(line), format!("invalid date '{}'", &record[0])))?;
        if let Some((d, first)) = last_date {
            if date == d {
                return Err(GraphError::parse(
                    loc(line),
                    format!("duplicate date {date} (first seen on line {first})"),
                ));
            }
            if date < d {
                return Err(GraphError::parse(loc(line), format!("date {date} is earlier than {d}")));
            }
        }
        last_date = Some((date, line));

        let mut row = Vec::with_capacity(p);
        let mut blanks = Vec::new();
        for (i, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                blanks.push(i);
                row.push(f64::NAN);
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| GraphError::parse(loc(line), format!("non-numeric value '{cell}' for {}", tickers[i])))?;
            if !v.is_finite() {
                return Err(GraphError::parse(
                    loc(line),
                    format!("non-finite value for {}", tickers[i]),
                ));
            }
            row.push(v);
        }
        if !blanks.is_empty() {
            match (missing, &prev) {
                (MissingPolicy::ForwardFill, Some(before)) => {
                    for &i in &blanks {
                        row[i] = before[i];
                    }
                    cells_filled += blanks.len();
                }
                _ => {
                    rows_dropped += 1;
                    continue;
                }
            }
        }
        prev = Some(row.clone());
        dates.push(date);
        rows.push(row);
    }
    if rows_dropped > 0 {
        log::warn!("{}: dropped {rows_dropped} rows with missing values", path.display());
    }
    if cells_filled > 0 {
        log::info!("{}: forward-filled {cells_filled} cells", path.display());
    }
    let n = rows.len();
    let values = DMatrix::from_fn(n, p, |t, i| rows[t][i]);
    Ok(RawPanel {
        dates,
        tickers,
        values,
        rows_read,
        rows_dropped,
        cells_filled,
    })
}

/// Price panel from a CSV file.
pub fn ingest_prices(path: &Path, missing: MissingPolicy) -> Result<(PricePanel, RawPanel)> {
    let raw = read_panel(path, missing)?;
    let panel = PricePanel::new(raw.dates.clone(), raw.tickers.clone(), raw.values.clone())?;
    Ok((panel, raw))
}

/// Returns panel from a CSV file.
pub fn ingest_returns(path: &Path, missing: MissingPolicy) -> Result<(ReturnsPanel, RawPanel)> {
    let raw = read_panel(path, missing)?;
    let panel = ReturnsPanel::new(raw.dates.clone(), raw.tickers.clone(), raw.values.clone())?;
    Ok((panel, raw))
}

/// 17 significant digits: parsing the text gives back the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Dense matrix with a ticker header line.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(labels)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix`]; returns it with its labels.
pub fn read_matrix(path: &Path) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let labels: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let p = labels.len();
    let mut data = Vec::with_capacity(p * p);
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| GraphError::parse(format!("{}:{line}", path.display()), e.to_string()))?;
        if record.len() != p {
            return Err(GraphError::parse(
                format!("{}:{line}", path.display()),
                format!("expected {p} values, found {}", record.len()),
            ));
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| GraphError::parse(format!("{}:{line}", path.display()), format!("bad number '{cell}'")))?;
            data.push(v);
        }
        rows += 1;
    }
    if rows != p || p == 0 {
        return Err(GraphError::parse(
            path.display().to_string(),
            format!("expected a square matrix, found {rows} rows and {p} columns"),
        ));
    }
    Ok((DMatrix::from_row_slice(p, p, &data), labels))
}

pub fn write_laplacian(path: &Path, l: &LaplacianMatrix, labels: &[String]) -> Result<()> {
    write_matrix(path, l.matrix(), labels)
}

pub fn read_laplacian(path: &Path) -> Result<(LaplacianMatrix, Vec<String>)> {
    let (m, labels) = read_matrix(path)?;
    let l = LaplacianMatrix::try_from_matrix(&m)
        .map_err(|e| GraphError::parse(path.display().to_string(), e.to_string()))?;
    Ok((l, labels))
}

/// `i,j,weight` for every weight above `threshold` (0-based node indices).
pub fn write_edges(path: &Path, w: &GraphWeights, threshold: f64) -> Result<usize> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["i", "j", "weight"])?;
    let edges = w.edges_above(threshold);
    for &(i, j, v) in &edges {
        out.write_record([i.to_string(), j.to_string(), fmt_f64(v)])?;
    }
    out.flush()?;
    Ok(edges.len())
}

/// Panel with a `date` column, written with full precision.
pub fn write_panel(path: &Path, dates: &[NaiveDate], labels: &[String], values: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(std::iter::once("date").chain(labels.iter().map(String::as_str)))?;
    for (t, d) in dates.iter().enumerate() {
        let row = values.row(t);
        w.write_record(std::iter::once(d.to_string()).chain(row.iter().map(|v| v.to_string())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
