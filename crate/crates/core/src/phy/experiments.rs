//! Empirical checks of uncoded-QAM diversity: lattice minimum distance and
//! the error-rate slope of joint ML detection.

use rand::Rng;

use super::detect::{sic_decode, FrontEnd, JointDetector, SicOrdering, SphereMode};
use super::schedule::rate_schedule;
use crate::exponents::{CurveKind, ExponentCurve};
use crate::harness::par_map;
use crate::model::{draw_channel, SystemConfig};
use crate::rng::{self, Purpose};
use crate::stats::{linear_fit, upper_window};
use crate::{db_to_linear, CMatrix, Error, Result, C64};

/// Half-width of the box `|re|, |im| ≤ 3` searched for difference vectors.
pub const MIN_DISTANCE_BOX: i32 = 3;

/// `min ‖G d‖` over nonzero Gaussian-integer vectors `d` inside the search box.
///
/// `d` and `i^k d` have the same norm, so only one representative per orbit
/// is scored: the one whose first nonzero entry has `re > 0, im ≥ 0`.
pub fn lattice_min_distance(g: &CMatrix) -> f64 {
    let n = g.ncols();
    let b = MIN_DISTANCE_BOX;
    let values: Vec<(i32, i32)> = (-b..=b).flat_map(|re| (-b..=b).map(move |im| (re, im))).collect();
    let canonical: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, (re, im))| *re > 0 && *im >= 0)
        .map(|(i, _)| i)
        .collect();
    let zero = values.iter().position(|v| *v == (0, 0)).unwrap();
    // prods[j][v] = column j times value v
    let prods: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut out = Vec::with_capacity(values.len() * g.nrows());
            for &(re, im) in &values {
                let d = C64::new(re as f64, im as f64);
                out.extend(g.column(j).iter().map(|x| x * d));
            }
            out
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut acc = vec![C64::new(0.0, 0.0); g.nrows()];
    search(&prods, &values, &canonical, zero, 0, true, &mut acc, &mut best);
    best.sqrt()
}

#[allow(clippy::too_many_arguments)]
fn search(
    prods: &[Vec<C64>],
    values: &[(i32, i32)],
    canonical: &[usize],
    zero: usize,
    level: usize,
    all_zero: bool,
    acc: &mut Vec<C64>,
    best: &mut f64,
) {
    let rows = acc.len();
    let last = level + 1 == prods.len();
    let visit = |v: usize, still_zero: bool, acc: &mut Vec<C64>, best: &mut f64| {
        let p = &prods[level][v * rows..(v + 1) * rows];
        if last {
            let mut s = 0.0;
            for i in 0..rows {
                s += (acc[i] + p[i]).norm_sqr();
            }
            if s < *best {
                *best = s;
            }
        } else {
            let saved = acc.clone();
            for i in 0..rows {
                acc[i] += p[i];
            }
            search(prods, values, canonical, zero, level + 1, still_zero, acc, best);
            acc.copy_from_slice(&saved);
        }
    };
    if all_zero {
        if !last {
            visit(zero, true, acc, best);
        }
        for &v in canonical {
            visit(v, false, acc, best);
        }
    } else {
        for v in 0..values.len() {
            visit(v, false, acc, best);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinDistanceResult {
    pub dimension: usize,
    pub trials: usize,
    pub epsilons: Vec<f64>,
    /// Empirical `P(d_G ≤ ε)` per ε.
    pub probabilities: Vec<f64>,
    pub stderrs: Vec<f64>,
}

impl MinDistanceResult {
    /// Least-squares slope of `log₁₀ P` against `log₁₀ ε`, skipping empty points.
    pub fn loglog_slope(&self) -> Result<(f64, f64)> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .epsilons
            .iter()
            .zip(&self.probabilities)
            .filter(|(_, p)| **p > 0.0)
            .map(|(e, p)| (e.log10(), p.log10()))
            .unzip();
        if xs.len() < 2 {
            return Err(Error::Domain("fewer than two non-empty CDF points".into()));
        }
        let (s, _, se) = linear_fit(&xs, &ys);
        Ok((s, se))
    }
}

/// Draws `trials` generators `G` (N × N, i.i.d. CN(0, 1)) and reports the
/// empirical CDF of the box-restricted minimum distance at each ε.
pub fn min_distance_experiment(
    n: usize,
    trials: usize,
    epsilons: &[f64],
    seed: u64,
) -> Result<MinDistanceResult> {
    if !(1..=3).contains(&n) {
        return Err(Error::Domain(format!("dimension {n} outside 1..=3")));
    }
    if trials == 0 || epsilons.is_empty() {
        return Err(Error::Domain("need at least one trial and one epsilon".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(Error::Domain("epsilons must lie in (0, 1]".into()));
    }
    let dists = par_map(0..trials as u64, |t| {
        let mut g = rng::stream(seed, t, Purpose::Lattice);
        let gm = CMatrix::from_fn(n, n, |_, _| rng::complex_normal(&mut g));
        lattice_min_distance(&gm)
    });
    let tf = trials as f64;
    let mut probabilities = Vec::with_capacity(epsilons.len());
    let mut stderrs = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        let hits = dists.iter().filter(|d| **d <= e).count() as f64;
        let p = hits / tf;
        probabilities.push(p);
        stderrs.push((p * (1.0 - p) / tf).sqrt());
    }
    Ok(MinDistanceResult {
        dimension: n,
        trials,
        epsilons: epsilons.to_vec(),
        probabilities,
        stderrs,
    })
}

/// Detector used by [`qam_error_rate_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ml,
    Sic(FrontEnd, SicOrdering),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRatePoint {
    pub snr_db: f64,
    pub q: u32,
    pub errors: u64,
    pub trials: u64,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QamDmtResult {
    pub antennas: usize,
    pub r: f64,
    pub points: Vec<ErrorRatePoint>,
    /// `−d log₁₀ P_e / d log₁₀ ρ` over the upper part of the grid.
    pub slope: f64,
    pub slope_stderr: f64,
}

impl QamDmtResult {
    /// `(snr_db, error rate)` samples as an empirical curve.
    pub fn curve(&self) -> Result<ExponentCurve> {
        ExponentCurve::new(
            CurveKind::Empirical,
            self.points.iter().map(|p| (p.snr_db, p.error_rate)).collect(),
        )
    }
}

/// Vector-error rate of uncoded QAM from `M` single-antenna users to `M`
/// receive antennas, with the constellation set by the rate schedule at
/// multiplexing gain `r` (one channel use per trial).
pub fn qam_error_rate_sweep(
    m: usize,
    r: f64,
    snr_db_grid: &[f64],
    trials: usize,
    seed: u64,
    detector: DetectorKind,
) -> Result<QamDmtResult> {
    if m == 0 || trials == 0 || snr_db_grid.is_empty() {
        return Err(Error::Domain("need M >= 1, trials >= 1 and a non-empty grid".into()));
    }
    let cfg = SystemConfig::new(m, 1, m, 1.0, 1)?.with_seed(seed);
    let mut points = Vec::with_capacity(snr_db_grid.len());
    for &snr_db in snr_db_grid {
        let spec = rate_schedule(snr_db, r, 1.0)?.qam();
        let rho = vec![db_to_linear(snr_db); m];
        let errs = par_map(0..trials as u64, |t| -> Result<bool> {
            let chan = draw_channel(&cfg, t);
            let mut g = rng::stream(seed, t, Purpose::Symbols);
            let sent: Vec<usize> = (0..m).map(|_| g.random_range(0..spec.size())).collect();
            let y: Vec<C64> = (0..m)
                .map(|i| {
                    let mut s = chan.w[(i, 0)];
                    for (u, &x) in sent.iter().enumerate() {
                        s += chan.h[(i, u)] * rho[u].sqrt() * spec.symbol(x);
                    }
                    s
                })
                .collect();
            let specs = vec![spec; m];
            let got = match detector {
                DetectorKind::Ml => JointDetector::new(&chan.h, &rho, &specs)?
                    .sphere(&y, SphereMode::Constellation)?
                    .indices,
                DetectorKind::Sic(fe, ord) => sic_decode(&y, &chan.h, &rho, &specs, fe, ord)?,
            };
            Ok(got != sent)
        });
        let mut errors = 0u64;
        for e in errs {
            errors += e? as u64;
        }
        points.push(ErrorRatePoint {
            snr_db,
            q: spec.q,
            errors,
            trials: trials as u64,
            error_rate: errors as f64 / trials as f64,
        });
    }
    let start = upper_window(points.len());
    let (xs, ys): (Vec<f64>, Vec<f64>) = points[start..]
        .iter()
        .filter(|p| p.errors > 0)
        .map(|p| (p.snr_db / 10.0, p.error_rate.log10()))
        .unzip();
    let (slope, slope_stderr) = if xs.len() >= 2 {
        let (s, _, se) = linear_fit(&xs, &ys);
        (-s, se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(QamDmtResult {
        antennas: m,
        r,
        points,
        slope,
        slope_stderr,
    })
}

/// [`qam_error_rate_sweep`] with joint ML detection.
pub fn qam_dmt_experiment(
    m: usize,
    r: f64,
    snr_db_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<QamDmtResult> {
    qam_error_rate_sweep(m, r, snr_db_grid, trials, seed, DetectorKind::Ml)
}
