//! Browser bindings: analytic exponent curves, a small distortion sweep and
//! the lattice minimum-distance CDF, each returned as a JSON string.

use macfeedback::harness::output::analytic_curves;
use macfeedback::harness::{run_sweep, ExperimentSpec, SchemeSelection};
use macfeedback::phy::min_distance_experiment;
use macfeedback::{Error, Result, SystemConfig};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Per-point trial cap; the page runs on the main thread.
pub const MAX_TRIALS: usize = 20_000;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

pub fn curves_json(k: usize, nt: usize, m: usize) -> Result<String> {
    let curves = analytic_curves(k, nt, m)?;
    let out: Vec<_> = curves
        .iter()
        .map(|c| json!({ "kind": c.kind.as_str(), "points": c.points }))
        .collect();
    Ok(serde_json::Value::Array(out).to_string())
}

pub fn sweep_json(
    scheme: &str,
    b: f64,
    snr_lo: f64,
    snr_hi: f64,
    points: usize,
    trials: usize,
    seed: u64,
) -> Result<String> {
    if !(2..=12).contains(&points) || snr_hi <= snr_lo {
        return Err(Error::Config("need 2 to 12 points and snr_hi > snr_lo".into()));
    }
    if trials == 0 || trials > MAX_TRIALS {
        return Err(Error::Config(format!("trials must lie in 1..={MAX_TRIALS}")));
    }
    let s = (1..=16)
        .find(|&s| {
            let t = b * s as f64;
            (t - t.round()).abs() < 1e-9 && t.round() >= 4.0
        })
        .ok_or_else(|| Error::Config(format!("no S ≤ 16 gives an integer T ≥ 4 for b = {b}")))?;
    let step = (snr_hi - snr_lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| snr_lo + step * i as f64).collect();
    let cfg = SystemConfig::new(4, 1, 4, b, s)?
        .with_grid(grid.clone())
        .with_trials(trials)
        .with_seed(seed);
    let scheme: SchemeSelection = scheme.parse()?;
    let results = run_sweep(&ExperimentSpec::new(scheme, cfg))?;
    let out: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "scheme": r.scheme.as_str(),
                "snr_db": grid,
                "mse": r.class_mse,
                "stderr": r.class_mse_stderr,
                "decode_error_rate": r.records.iter().map(|x| x.decode_error_rate).collect::<Vec<_>>(),
                "slope": r.fitted_slope,
            })
        })
        .collect();
    Ok(serde_json::Value::Array(out).to_string())
}

pub fn min_distance_json(n: usize, trials: usize, seed: u64) -> Result<String> {
    if trials > 50 * MAX_TRIALS {
        return Err(Error::Config(format!("trials must not exceed {}", 50 * MAX_TRIALS)));
    }
    let eps: Vec<f64> = (0..10).map(|i| 0.05 * 1.25f64.powi(i)).collect();
    let res = min_distance_experiment(n, trials, &eps, seed)?;
    let slope = res.loglog_slope().ok().map(|s| s.0);
    Ok(json!({
        "n": n,
        "epsilon": res.epsilons,
        "probability": res.probabilities,
        "stderr": res.stderrs,
        "slope": slope,
    })
    .to_string())
}

/// Analytic exponent curves over `b ∈ [1, 10]`.
#[wasm_bindgen]
pub fn exponent_curves(k: usize, nt: usize, m: usize) -> std::result::Result<String, JsError> {
    curves_json(k, nt, m).map_err(js)
}

/// Monte Carlo distortion for `K = M = 4`, `N_t = 1` over an even SNR grid.
#[wasm_bindgen]
pub fn distortion_sweep(
    scheme: &str,
    b: f64,
    snr_lo: f64,
    snr_hi: f64,
    points: usize,
    trials: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    sweep_json(scheme, b, snr_lo, snr_hi, points, trials, seed as u64).map_err(js)
}

/// Empirical CDF of the minimum distance of a random `N`-dimensional lattice.
#[wasm_bindgen]
pub fn min_distance_cdf(n: usize, trials: usize, seed: u32) -> std::result::Result<String, JsError> {
    min_distance_json(n, trials, seed as u64).map_err(js)
}
