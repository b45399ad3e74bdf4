//! Analytic exponent curves: single-user and MAC diversity-multiplexing
//! tradeoffs, the informed-transmitter upper bound on the distortion SNR
//! exponent, the separated / hybrid / SIC achievable exponents, and a
//! Monte-Carlo estimate of the genie-aided distortion lower bound.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{draw_channel_matrix, SystemConfig};
use crate::stats::Moments;
use crate::{CMatrix, Error, Result, C64};

const BISECTION_TOL: f64 = 1e-12;

/// Which analytic (or measured) function a curve samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    DmtSingle,
    DmtMac,
    UpperBound,
    Separated,
    Hybrid,
    Sic,
    /// Uncoded analog feedback, `δ(b) = 1`.
    Analog,
    Empirical,
}

impl CurveKind {
    pub const ALL: [CurveKind; 8] = [
        CurveKind::DmtSingle,
        CurveKind::DmtMac,
        CurveKind::UpperBound,
        CurveKind::Separated,
        CurveKind::Hybrid,
        CurveKind::Sic,
        CurveKind::Analog,
        CurveKind::Empirical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::DmtSingle => "dmt_single",
            CurveKind::DmtMac => "dmt_mac",
            CurveKind::UpperBound => "upper_bound",
            CurveKind::Separated => "separated",
            CurveKind::Hybrid => "hybrid",
            CurveKind::Sic => "sic",
            CurveKind::Analog => "analog",
            CurveKind::Empirical => "empirical",
        }
    }
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurveKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown curve kind `{s}`")))
    }
}

/// Sampled curve, `x` strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentCurve {
    pub kind: CurveKind,
    pub points: Vec<(f64, f64)>,
}

impl ExponentCurve {
    pub fn new(kind: CurveKind, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Domain("curve abscissae must be strictly increasing".into()));
        }
        Ok(ExponentCurve { kind, points })
    }
}

/// Antenna bookkeeping for a user subset of size `size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetSpec {
    pub size: usize,
    /// `min{M, |𝒦|·N_t}`
    pub m: usize,
    /// `max{M, |𝒦|·N_t}`
    pub n: usize,
}

impl SubsetSpec {
    pub fn new(size: usize, user_antennas: usize, bs_antennas: usize) -> Self {
        let tx = size * user_antennas;
        SubsetSpec {
            size,
            m: tx.min(bs_antennas),
            n: tx.max(bs_antennas),
        }
    }

    /// `δ_{|𝒦|}(b) = Σ_{i=1}^{m} min{b/|𝒦|, 2i − 1 + n − m}`
    pub fn delta(&self, b: f64) -> f64 {
        let share = b / self.size as f64;
        (1..=self.m)
            .map(|i| share.min((2 * i - 1 + self.n - self.m) as f64))
            .sum()
    }
}

fn check_dims(k: usize, nt: usize, m: usize) -> Result<()> {
    if k == 0 || nt == 0 || m == 0 {
        return Err(Error::Domain("K, N_t and M must be positive".into()));
    }
    Ok(())
}

/// Single-user MIMO DMT: piecewise-linear interpolation of
/// `(k, (n_t − k)(n_r − k))` for `k = 0..min{n_t, n_r}`.
pub fn dmt_single_user(n_t: usize, n_r: usize, r: f64) -> Result<f64> {
    let kmax = n_t.min(n_r);
    if !(0.0..=kmax as f64).contains(&r) {
        return Err(Error::Domain(format!(
            "multiplexing gain {r} outside [0, {kmax}] for {n_t}x{n_r}"
        )));
    }
    let corner = |k: usize| ((n_t - k) * (n_r - k)) as f64;
    let k = (r.floor() as usize).min(kmax.saturating_sub(1));
    if kmax == 0 {
        return Ok(0.0);
    }
    let frac = r - k as f64;
    Ok(corner(k) + frac * (corner(k + 1) - corner(k)))
}

/// Largest per-user multiplexing gain on which the MAC DMT is defined.
pub fn mac_max_gain(k: usize, nt: usize, m: usize) -> f64 {
    (nt as f64).min(m as f64 / k as f64)
}

/// Symmetric-rate MAC DMT: the single-user tradeoff below the load threshold
/// `min{N_t, M/(K+1)}` and the pooled "super-user" tradeoff `d_{K N_t, M}(K r)`
/// above it.
pub fn dmt_mac(k: usize, nt: usize, m: usize, r: f64) -> Result<f64> {
    check_dims(k, nt, m)?;
    let rmax = mac_max_gain(k, nt, m);
    if !(r >= 0.0 && r <= rmax + 1e-15) {
        return Err(Error::Domain(format!(
            "multiplexing gain {r} outside [0, {rmax}] for K={k}, N_t={nt}, M={m}"
        )));
    }
    let r = r.min(rmax);
    let threshold = (nt as f64).min(m as f64 / (k as f64 + 1.0));
    if r <= threshold {
        dmt_single_user(nt, m, r)
    } else {
        let kr = (k as f64 * r).min((k * nt).min(m) as f64);
        dmt_single_user(k * nt, m, kr)
    }
}

/// `min_{|𝒦|} δ_{|𝒦|}(b)`: upper bound on any scheme's distortion SNR exponent.
pub fn informed_transmitter_bound(k: usize, nt: usize, m: usize, b: f64) -> Result<f64> {
    check_dims(k, nt, m)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("bandwidth efficiency {b} must be positive")));
    }
    Ok((1..=k)
        .map(|size| SubsetSpec::new(size, nt, m).delta(b))
        .fold(f64::INFINITY, f64::min))
}

/// Bisection for the root of an increasing function on `[lo, hi]`.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Separated source-channel exponent: balances the quantizer exponent `b r_c`
/// against the MAC diversity `d*_MAC(r_c)`. Returns `(δ_sep, r_c)`.
pub fn separated_exponent(k: usize, nt: usize, m: usize, b: f64) -> Result<(f64, f64)> {
    check_dims(k, nt, m)?;
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("bandwidth efficiency {b} must be positive")));
    }
    let rmax = mac_max_gain(k, nt, m);
    let d = |r: f64| dmt_mac(k, nt, m, r).expect("r within [0, r_max]");
    let r = bisect(0.0, rmax, |r| b * r - d(r));
    Ok((d(r), r))
}

/// Number of analog antennas per user in the hybrid scheme: the largest
/// `N_t' ≤ N_t` with `K·N_t' ≤ M`.
pub fn hybrid_analog_antennas(k: usize, nt: usize, m: usize) -> usize {
    nt.min(m / k)
}

/// Hybrid digital-analog exponent: solves `1 + (r/N_t')(N_t' b − 1) = d*_MAC(r)`.
/// Returns `(δ_hybrid, r*)`.
pub fn hybrid_exponent(k: usize, nt: usize, m: usize, b: f64) -> Result<(f64, f64)> {
    check_dims(k, nt, m)?;
    if m < k {
        return Err(Error::Domain(format!(
            "hybrid scheme needs M ≥ K (M = {m}, K = {k})"
        )));
    }
    if !(b >= 1.0) || !b.is_finite() {
        return Err(Error::Domain(format!("hybrid scheme needs b ≥ 1, got {b}")));
    }
    let ntp = hybrid_analog_antennas(k, nt, m) as f64;
    let rmax = mac_max_gain(k, nt, m);
    let d = |r: f64| dmt_mac(k, nt, m, r).expect("r within [0, r_max]");
    let lhs = |r: f64| 1.0 + r / ntp * (ntp * b - 1.0);
    if lhs(0.0) >= d(0.0) {
        // Zero digital rate already saturates the diversity.
        return Ok((d(0.0), 0.0));
    }
    let r = bisect(0.0, rmax, |r| lhs(r) - d(r));
    Ok((d(r), r))
}

/// Separated exponent with SIC receivers (`N_t = 1, M = K`): `b / (1 + b)`.
pub fn sic_exponent(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("bandwidth efficiency {b} must be positive")));
    }
    if b.is_infinite() {
        return Ok(1.0);
    }
    Ok(b / (1.0 + b))
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// `ln det(I + ρ A Aᴴ)` via Cholesky of the smaller Gram matrix.
pub fn log_det_gram(a: &CMatrix, rho: f64) -> f64 {
    let (m, n) = a.shape();
    let gram = if n <= m { a.adjoint() * a } else { a * a.adjoint() };
    let dim = gram.nrows();
    let mut g = gram * C64::new(rho, 0.0);
    for i in 0..dim {
        g[(i, i)] += C64::new(1.0, 0.0);
    }
    let chol = g.cholesky().expect("I + ρ A Aᴴ is positive definite");
    let l = chol.l();
    (0..dim).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

/// Largest equal rate (nats / channel use) supported by the MAC at SNR `rho`:
/// `min_𝒦 (1/|𝒦|) ln det(I + ρ H_𝒦 H_𝒦ᴴ)` over all non-empty user subsets.
pub fn symmetric_mac_rate(h: &CMatrix, users: usize, rho: f64) -> f64 {
    let nt = h.ncols() / users;
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << users) {
        let members: Vec<usize> = (0..users).filter(|u| mask & (1 << u) != 0).collect();
        let cols: Vec<usize> = members
            .iter()
            .flat_map(|&u| (u * nt)..((u + 1) * nt))
            .collect();
        let sub = h.select_columns(cols.iter());
        let rate = log_det_gram(&sub, rho) / members.len() as f64;
        best = best.min(rate);
    }
    best
}

/// Genie-aided lower bound `E[exp(−b R(H))]` on the achievable distortion.
///
/// Sample `i` uses the channel of trial `i` under `cfg.seed`, so calls at
/// different SNRs share channel draws.
pub fn lower_bound_mc(cfg: &SystemConfig, rho: f64, n_samples: usize) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::Domain("lower_bound_mc needs at least one sample".into()));
    }
    let values: Vec<f64> = crate::harness::par_map(0..n_samples as u64, |i| {
        let h = draw_channel_matrix(cfg, i);
        let rate = symmetric_mac_rate(&h, cfg.users, rho);
        (-cfg.b * rate).exp()
    });
    let mut mom = Moments::default();
    for v in values {
        mom.push(v);
    }
    Ok(McEstimate {
        mean: mom.mean(),
        stderr: mom.stderr(),
        samples: n_samples,
    })
}

/// Samples an analytic exponent over `grid` (a `b` grid for distortion
/// exponents, an `r` grid for DMT kinds).
pub fn curve_tabulate(
    kind: CurveKind,
    k: usize,
    nt: usize,
    m: usize,
    grid: &[f64],
) -> Result<ExponentCurve> {
    if grid.is_empty() {
        return Err(Error::Domain("empty grid".into()));
    }
    let points = grid
        .iter()
        .map(|&x| {
            let y = match kind {
                CurveKind::DmtSingle => dmt_single_user(nt, m, x)?,
                CurveKind::DmtMac => dmt_mac(k, nt, m, x)?,
                CurveKind::UpperBound => informed_transmitter_bound(k, nt, m, x)?,
                CurveKind::Separated => separated_exponent(k, nt, m, x)?.0,
                CurveKind::Hybrid => hybrid_exponent(k, nt, m, x)?.0,
                CurveKind::Sic => sic_exponent(x)?,
                CurveKind::Analog => {
                    if x < 1.0 {
                        return Err(Error::Domain("analog exponent tabulated for b ≥ 1".into()));
                    }
                    1.0
                }
                CurveKind::Empirical => {
                    return Err(Error::Domain("empirical curves are measured, not tabulated".into()))
                }
            };
            Ok((x, y))
        })
        .collect::<Result<Vec<_>>>()?;
    ExponentCurve::new(kind, points)
}

pub const CURVE_CSV_HEADER: &str = "x,y,kind";

/// Writes curves as `x,y,kind` rows.
pub fn write_curves_csv<W: Write>(out: &mut W, curves: &[ExponentCurve]) -> std::io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for c in curves {
        for (x, y) in &c.points {
            writeln!(out, "{x},{y},{}", c.kind)?;
        }
    }
    Ok(())
}

/// Parses the output of [`write_curves_csv`], grouping consecutive rows by kind.
pub fn parse_curves_csv(text: &str) -> Result<Vec<ExponentCurve>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CURVE_CSV_HEADER => {}
        _ => return Err(Error::parse(1, "header", format!("expected `{CURVE_CSV_HEADER}`"))),
    }
    let mut curves: Vec<ExponentCurve> = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(Error::parse(line_no, "row", "expected 3 columns"));
        }
        let x: f64 = f[0].parse().map_err(|_| Error::parse(line_no, "x", f[0]))?;
        let y: f64 = f[1].parse().map_err(|_| Error::parse(line_no, "y", f[1]))?;
        let kind: CurveKind = f[2].parse().map_err(|_| Error::parse(line_no, "kind", f[2]))?;
        match curves.last_mut() {
            Some(c) if c.kind == kind => c.points.push((x, y)),
            _ => curves.push(ExponentCurve { kind, points: vec![(x, y)] }),
        }
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= TOL
    }

    #[test]
    fn single_user_dmt_examples() {
        assert_eq!(dmt_single_user(1, 4, 0.0).unwrap(), 4.0);
        assert_eq!(dmt_single_user(1, 4, 1.0).unwrap(), 0.0);
        assert!(close(dmt_single_user(2, 2, 0.5).unwrap(), 2.5));
        assert!(close(dmt_single_user(2, 2, 2.0).unwrap(), 0.0));
        assert!(dmt_single_user(2, 2, 2.1).is_err());
        assert!(dmt_single_user(2, 2, -0.1).is_err());
    }

    #[test]
    fn mac_dmt_examples() {
        assert!(close(dmt_mac(4, 1, 4, 0.5).unwrap(), 2.0));
        assert!(close(dmt_mac(4, 1, 4, 0.0).unwrap(), 4.0));
        assert!(close(dmt_mac(2, 2, 2, 0.5).unwrap(), 2.5));
        assert!(dmt_mac(4, 1, 4, 1.01).is_err());
        // heavily loaded branch: K N_t = 4 pooled antennas, 2x... d_{4,2}(2r)
        let d = dmt_mac(2, 2, 2, 0.9).unwrap();
        assert!(close(d, dmt_single_user(4, 2, 1.8).unwrap()));
    }

    #[test]
    fn mac_dmt_continuous_at_threshold() {
        for (k, nt, m) in [(4, 1, 4), (2, 2, 2), (3, 2, 4), (2, 3, 6), (5, 1, 3)] {
            let thr = (nt as f64).min(m as f64 / (k as f64 + 1.0));
            let left = dmt_single_user(nt, m, thr).unwrap();
            let right = dmt_single_user(k * nt, m, k as f64 * thr).unwrap();
            assert!((left - right).abs() <= 1e-12, "K={k} Nt={nt} M={m}: {left} vs {right}");
        }
    }

    #[test]
    fn informed_bound_examples() {
        assert!(close(informed_transmitter_bound(4, 1, 4, 2.0).unwrap(), 2.0));
        assert!(close(informed_transmitter_bound(4, 1, 4, 100.0).unwrap(), 4.0));
        assert!(close(informed_transmitter_bound(2, 2, 2, 4.0).unwrap(), 4.0));
    }

    #[test]
    fn separated_examples() {
        let (d, r) = separated_exponent(4, 1, 4, 2.0).unwrap();
        assert!(close(d, 4.0 / 3.0) && close(r, 2.0 / 3.0));
        let (d, r) = separated_exponent(4, 1, 4, 4.0).unwrap();
        assert!(close(d, 2.0) && close(r, 0.5));
        let (d, r) = separated_exponent(1, 1, 1, 3.0).unwrap();
        assert!(close(d, 0.75) && close(r, 0.25));
    }

    #[test]
    fn hybrid_examples() {
        let (d, r) = hybrid_exponent(4, 1, 4, 4.0).unwrap();
        assert!(close(d, 16.0 / 7.0));
        assert!(close(r, 3.0 / 7.0));
        assert!(close(hybrid_exponent(4, 1, 4, 1.0).unwrap().0, 1.0));
        assert!(close(hybrid_exponent(4, 1, 4, 2.0).unwrap().0, 1.6));
        assert!(hybrid_exponent(4, 1, 3, 2.0).is_err());
    }

    #[test]
    fn sic_examples() {
        assert!(close(sic_exponent(1.0).unwrap(), 0.5));
        assert!(close(sic_exponent(4.0).unwrap(), 0.8));
        assert_eq!(sic_exponent(f64::INFINITY).unwrap(), 1.0);
        assert!(sic_exponent(1e9).unwrap() < 1.0);
    }

    #[test]
    fn balance_equations_hold_at_returned_gain() {
        for (k, nt, m) in [(4, 1, 4), (2, 2, 2), (3, 2, 6), (2, 1, 4), (3, 3, 4)] {
            for b in [1.0, 1.5, 2.0, 3.0, 4.0, 7.5] {
                let (d, r) = separated_exponent(k, nt, m, b).unwrap();
                assert!((b * r - dmt_mac(k, nt, m, r).unwrap()).abs() <= 1e-9);
                assert!((d - b * r).abs() <= 1e-9);
                if m >= k {
                    let (dh, rh) = hybrid_exponent(k, nt, m, b).unwrap();
                    let ntp = hybrid_analog_antennas(k, nt, m) as f64;
                    let lhs = 1.0 + rh / ntp * (ntp * b - 1.0);
                    assert!((lhs - dmt_mac(k, nt, m, rh).unwrap()).abs() <= 1e-9);
                    assert!(dh >= 1.0 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn closed_forms_for_single_antenna_users() {
        for k in 1..=6usize {
            for b in [1.0, 1.25, 2.0, 3.5, 6.0, 10.0] {
                let kf = k as f64;
                let (d, r) = separated_exponent(k, 1, k, b).unwrap();
                assert!((d - b * kf / (kf + b)).abs() < 1e-9);
                assert!((r - kf / (kf + b)).abs() < 1e-9);
                let (dh, _) = hybrid_exponent(k, 1, k, b).unwrap();
                assert!((dh - (1.0 + (b - 1.0) * (kf - 1.0) / (kf + b - 1.0))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curves_and_csv_round_trip() {
        let grid: Vec<f64> = (1..=8).map(|b| b as f64).collect();
        let ub = curve_tabulate(CurveKind::UpperBound, 4, 1, 4, &grid).unwrap();
        for (b, y) in &ub.points {
            assert!(close(*y, b.min(4.0)));
        }
        let sep = curve_tabulate(CurveKind::Separated, 4, 1, 4, &[2.0, 4.0]).unwrap();
        assert!(close(sep.points[0].1, 4.0 / 3.0) && close(sep.points[1].1, 2.0));
        let sic = curve_tabulate(CurveKind::Sic, 4, 1, 4, &[4.0]).unwrap();
        assert!(close(sic.points[0].1, 0.8));
        assert!(curve_tabulate(CurveKind::Sic, 4, 1, 4, &[]).is_err());
        assert!(ExponentCurve::new(CurveKind::Sic, vec![(1.0, 0.5), (1.0, 0.5)]).is_err());

        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[ub.clone(), sep.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,y,kind\n"));
        let parsed = parse_curves_csv(&text).unwrap();
        assert_eq!(parsed, vec![ub, sep]);
    }

    #[test]
    fn lower_bound_is_one_at_zero_snr() {
        let cfg = SystemConfig::new(2, 1, 2, 2.0, 1).unwrap().with_seed(3);
        let est = lower_bound_mc(&cfg, 0.0, 50).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }
}
