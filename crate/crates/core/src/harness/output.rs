//! CSV emission of sweep results and analytic curves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::SweepResult;
use crate::exponents::{curve_tabulate, write_curves_csv, CurveKind, ExponentCurve};
use crate::{Error, Result};

pub const RESULTS_CSV_HEADER: &str =
    "scheme,snr_db,user_class,mse,mse_stderr,decode_error_rate,trials";

pub const SLOPES_CSV_HEADER: &str = "scheme,user_class,slope,slope_stderr";

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub scheme: String,
    pub snr_db: f64,
    pub user_class: String,
    pub mse: f64,
    pub mse_stderr: f64,
    pub decode_error_rate: f64,
    pub trials: u64,
}

pub fn rows_from_results(results: &[SweepResult]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for r in results {
        for (i, rec) in r.records.iter().enumerate() {
            rows.push(CurveRow {
                scheme: r.scheme.to_string(),
                snr_db: r.class_snr_db[i],
                user_class: r.user_class.clone(),
                mse: r.class_mse[i],
                mse_stderr: r.class_mse_stderr[i],
                decode_error_rate: rec.decode_error_rate,
                trials: rec.trials_used as u64,
            });
        }
    }
    rows
}

pub fn write_rows_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(RESULTS_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.scheme, r.snr_db, r.user_class, r.mse, r.mse_stderr, r.decode_error_rate, r.trials
        );
    }
    s
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == RESULTS_CSV_HEADER => {}
        _ => return Err(Error::parse(1, "header", format!("expected `{RESULTS_CSV_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse(i + 1, "row", format!("expected 7 fields, got {}", f.len())));
        }
        let num = |j: usize, name: &str| -> Result<f64> {
            f[j].parse()
                .map_err(|_| Error::parse(i + 1, name, format!("cannot parse '{}'", f[j])))
        };
        rows.push(CurveRow {
            scheme: f[0].to_string(),
            snr_db: num(1, "snr_db")?,
            user_class: f[2].to_string(),
            mse: num(3, "mse")?,
            mse_stderr: num(4, "mse_stderr")?,
            decode_error_rate: num(5, "decode_error_rate")?,
            trials: f[6]
                .parse()
                .map_err(|_| Error::parse(i + 1, "trials", format!("cannot parse '{}'", f[6])))?,
        });
    }
    Ok(rows)
}

pub fn write_slopes_csv(results: &[SweepResult]) -> String {
    let mut s = String::from(SLOPES_CSV_HEADER);
    s.push('\n');
    for r in results {
        let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.scheme,
            r.user_class,
            fmt(r.fitted_slope),
            fmt(r.slope_stderr)
        );
    }
    s
}

/// The analytic exponent curves for `(K, N_t, M)` over `b ∈ [1, 10]`.
pub fn analytic_curves(k: usize, nt: usize, m: usize) -> Result<Vec<ExponentCurve>> {
    let grid: Vec<f64> = (0..=36).map(|i| 1.0 + 0.25 * i as f64).collect();
    let mut kinds = vec![CurveKind::UpperBound, CurveKind::Separated];
    if m >= k {
        kinds.push(CurveKind::Hybrid);
    }
    if nt == 1 && m == k {
        kinds.push(CurveKind::Sic);
    }
    kinds.push(CurveKind::Analog);
    kinds
        .into_iter()
        .map(|kind| curve_tabulate(kind, k, nt, m, &grid))
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv`, `slopes.csv` and `exponents.csv` (analytic curves
/// for the same antenna configuration) into `dir`; returns the paths.
pub fn emit_curves(
    results: &[SweepResult],
    dims: (usize, usize, usize),
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let results_path = dir.join("results.csv");
    write_file(&results_path, &write_rows_csv(&rows_from_results(results)))?;
    let slopes_path = dir.join("slopes.csv");
    write_file(&slopes_path, &write_slopes_csv(results))?;
    let curves_path = dir.join("exponents.csv");
    let mut buf = Vec::new();
    write_curves_csv(&mut buf, &analytic_curves(dims.0, dims.1, dims.2)?).map_err(|source| {
        Error::Io {
            path: curves_path.clone(),
            source,
        }
    })?;
    write_file(&curves_path, &String::from_utf8(buf).expect("ASCII CSV"))?;
    Ok(vec![results_path, slopes_path, curves_path])
}
