//! SNR sweeps, per-class aggregation and slope fitting.

use super::par_map;
use super::spec::{ExperimentSpec, RatePolicy};
use crate::exponents::{hybrid_exponent, separated_exponent};
use crate::schemes::{run_scheme, HybridLayout, OperatingPoint, SchemeKind};
use crate::stats::{linear_fit, upper_window, Moments};
use crate::{DistortionRecord, Error, Result, SystemConfig};

/// Trials evaluated between early-stop checks. Fixed so that the set of
/// trials used never depends on the thread count.
pub const CHUNK: usize = 2048;

/// Users sharing a nominal SNR, reported together.
#[derive(Debug, Clone, PartialEq)]
pub struct UserClass {
    pub label: String,
    pub users: Vec<usize>,
    /// Nominal SNR offset of the class (0 for a symmetric sweep).
    pub nominal_db: f64,
}

/// Classes of a configuration: one class `all` for a symmetric sweep, or one
/// per distinct nominal SNR (in first-appearance order).
pub fn user_classes(cfg: &SystemConfig) -> Vec<UserClass> {
    match &cfg.per_user_snr_db {
        None => vec![UserClass {
            label: "all".into(),
            users: (0..cfg.users).collect(),
            nominal_db: 0.0,
        }],
        Some(p) => {
            let mut out: Vec<UserClass> = Vec::new();
            for (u, &db) in p.iter().enumerate() {
                match out.iter_mut().find(|c| c.nominal_db == db) {
                    Some(c) => c.users.push(u),
                    None => out.push(UserClass {
                        label: format!("{db}dB"),
                        users: vec![u],
                        nominal_db: db,
                    }),
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: SchemeKind,
    pub user_class: String,
    pub users: Vec<usize>,
    /// Per-user records along the grid.
    pub records: Vec<DistortionRecord>,
    /// The class's own SNR at each grid point.
    pub class_snr_db: Vec<f64>,
    /// Per-trial class-average MSE: mean and standard error at each point.
    pub class_mse: Vec<f64>,
    pub class_mse_stderr: Vec<f64>,
    /// Mean `‖X_i‖²_F` per slot, averaged over the class.
    pub mean_tx_energy: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

/// Operating point of `kind` at grid value `snr_db` under `rate`.
pub fn operating_point(
    kind: SchemeKind,
    cfg: &SystemConfig,
    snr_db: f64,
    rate: RatePolicy,
) -> Result<OperatingPoint> {
    let (k, nt, m, b) = (cfg.users, cfg.user_antennas, cfg.bs_antennas, cfg.b);
    match kind {
        SchemeKind::Analog => Ok(OperatingPoint::analog(cfg, snr_db)),
        SchemeKind::Separated | SchemeKind::Ideal => {
            let r_c = match rate {
                RatePolicy::Fixed(r) => r,
                RatePolicy::Auto => separated_exponent(k, nt, m, b)?.1,
            };
            OperatingPoint::scheduled(cfg, snr_db, r_c, b)
        }
        SchemeKind::Hybrid => {
            let layout = HybridLayout::new(cfg)?;
            if layout.t_d == 0 {
                return Ok(OperatingPoint::analog(cfg, snr_db));
            }
            let r_c = match rate {
                RatePolicy::Fixed(r) => r,
                RatePolicy::Auto => hybrid_exponent(k, nt, m, b)?.1,
            };
            let b_eff = layout.t_d as f64 / cfg.source_len as f64;
            OperatingPoint::scheduled(cfg, snr_db, r_c, b_eff)
        }
    }
}

struct PointStats {
    per_user: Vec<Moments>,
    per_class: Vec<Moments>,
    energy: Vec<f64>,
    errors: u64,
    trials: usize,
}

fn run_point(
    kind: SchemeKind,
    spec: &ExperimentSpec,
    classes: &[UserClass],
    op: &OperatingPoint,
) -> Result<PointStats> {
    let cfg = &spec.cfg;
    let s = cfg.source_len as f64;
    let mut st = PointStats {
        per_user: vec![Moments::default(); cfg.users],
        per_class: vec![Moments::default(); classes.len()],
        energy: vec![0.0; cfg.users],
        errors: 0,
        trials: 0,
    };
    while st.trials < cfg.trials {
        let end = (st.trials + CHUNK).min(cfg.trials);
        let outcomes = par_map(st.trials as u64..end as u64, |t| run_scheme(kind, cfg, op, t));
        for o in outcomes {
            let o = o?;
            for u in 0..cfg.users {
                st.per_user[u].push(o.per_user_se[u] / s);
                st.energy[u] += o.tx_energy[u];
            }
            for (c, class) in classes.iter().enumerate() {
                let mean = class.users.iter().map(|&u| o.per_user_se[u] / s).sum::<f64>()
                    / class.users.len() as f64;
                st.per_class[c].push(mean);
            }
            st.errors += o.digital_error as u64;
        }
        st.trials = end;
        if let Some(th) = spec.early_stop {
            let done = st
                .per_class
                .iter()
                .all(|m| m.n >= 2 && m.stderr() < th * m.mean());
            if done {
                break;
            }
        }
    }
    Ok(st)
}

/// Runs every selected scheme over the grid; one result per scheme and class.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepResult>> {
    spec.validate()?;
    let cfg = &spec.cfg;
    let classes = user_classes(cfg);
    let mut out = Vec::new();
    for kind in spec.scheme.kinds() {
        let mut points = Vec::with_capacity(cfg.snr_db_grid.len());
        for &snr_db in &cfg.snr_db_grid {
            let op = operating_point(kind, cfg, snr_db, spec.rate)?;
            points.push((snr_db, run_point(kind, spec, &classes, &op)?));
        }
        let records: Vec<DistortionRecord> = points
            .iter()
            .map(|(snr_db, st)| DistortionRecord {
                snr_db: *snr_db,
                per_user_mse: st.per_user.iter().map(Moments::mean).collect(),
                per_user_mse_stderr: st.per_user.iter().map(Moments::stderr).collect(),
                decode_error_rate: st.errors as f64 / st.trials as f64,
                trials_used: st.trials,
            })
            .collect();
        for (c, class) in classes.iter().enumerate() {
            let class_snr_db: Vec<f64> = cfg
                .snr_db_grid
                .iter()
                .map(|g| ((g + class.nominal_db) * 1e9).round() / 1e9)
                .collect();
            let class_mse: Vec<f64> = points.iter().map(|(_, st)| st.per_class[c].mean()).collect();
            let fit = if class_snr_db.len() >= 3 {
                let pts: Vec<(f64, f64)> =
                    class_snr_db.iter().copied().zip(class_mse.iter().copied()).collect();
                let range = spec
                    .fit_range
                    .map(|(lo, hi)| (lo + class.nominal_db, hi + class.nominal_db));
                estimate_slope(&pts, range).ok()
            } else {
                None
            };
            out.push(SweepResult {
                scheme: kind,
                user_class: class.label.clone(),
                users: class.users.clone(),
                records: records.clone(),
                class_snr_db,
                class_mse_stderr: points.iter().map(|(_, st)| st.per_class[c].stderr()).collect(),
                class_mse,
                mean_tx_energy: points
                    .iter()
                    .map(|(_, st)| {
                        class.users.iter().map(|&u| st.energy[u]).sum::<f64>()
                            / (class.users.len() * st.trials) as f64
                    })
                    .collect(),
                fitted_slope: fit.map(|f| f.0),
                slope_stderr: fit.map(|f| f.1),
            });
        }
    }
    Ok(out)
}

/// Asymmetric-SNR sweep: each class of users sharing a nominal SNR gets its
/// own schedule, and the grid values are offsets added to every nominal SNR.
pub fn run_asymmetric(spec: &ExperimentSpec) -> Result<Vec<SweepResult>> {
    let p = spec
        .cfg
        .per_user_snr_db
        .as_ref()
        .ok_or_else(|| Error::Config("asymmetric sweep needs per_user_snr_db".into()))?;
    if p.len() != spec.cfg.users {
        return Err(Error::Config("per_user_snr_db must have one entry per user".into()));
    }
    if spec.scheme.kinds().contains(&SchemeKind::Analog) {
        return Err(Error::Config(
            "asymmetric sweep schedules digital schemes; drop analog".into(),
        ));
    }
    run_sweep(spec)
}

/// Empirical exponent: minus the least-squares slope of `log₁₀ D` against
/// `log₁₀ ρ`. Points come as `(snr_db, D)`; the fit uses the points inside
/// `range` when given, otherwise the upper half of the grid (at least three
/// points when available).
pub fn estimate_slope(points: &[(f64, f64)], range: Option<(f64, f64)>) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "slope needs at least 3 SNR points, got {}",
            points.len()
        )));
    }
    let window: Vec<(f64, f64)> = match range {
        Some((lo, hi)) => points
            .iter()
            .copied()
            .filter(|(x, _)| *x >= lo - 1e-9 && *x <= hi + 1e-9)
            .collect(),
        None => points[upper_window(points.len())..].to_vec(),
    };
    if window.len() < 2 {
        return Err(Error::Domain("fit window holds fewer than 2 points".into()));
    }
    if window.iter().any(|(_, d)| !(*d > 0.0)) {
        return Err(Error::Domain("distortion must be positive to take logs".into()));
    }
    let xs: Vec<f64> = window.iter().map(|(x, _)| x / 10.0).collect();
    let ys: Vec<f64> = window.iter().map(|(_, d)| d.log10()).collect();
    let (s, _, se) = linear_fit(&xs, &ys);
    Ok((-s, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::SchemeSelection;

    fn power_law(exp: f64, noise: impl Fn(usize) -> f64) -> Vec<(f64, f64)> {
        (0..8)
            .map(|i| {
                let db = 10.0 + 3.0 * i as f64;
                (db, 10f64.powf(-exp * db / 10.0) * (1.0 + noise(i)))
            })
            .collect()
    }

    #[test]
    fn slope_of_exact_power_law() {
        let (s, e) = estimate_slope(&power_law(2.0, |_| 0.0), None).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && e < 1e-12);
        let flat: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.3)).collect();
        assert!(estimate_slope(&flat, None).unwrap().0.abs() < 1e-12);
        assert!(estimate_slope(&flat[..2], None).is_err());
    }

    #[test]
    fn slope_with_range() {
        let mut pts = power_law(1.0, |_| 0.0);
        pts[0].1 = 1.0;
        let (s, _) = estimate_slope(&pts, Some((13.0, 31.0))).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(estimate_slope(&pts, Some((100.0, 200.0))).is_err());
    }

    #[test]
    fn classes_group_equal_nominal_snr() {
        let cfg = SystemConfig::new(4, 1, 4, 4.0, 1)
            .unwrap()
            .with_per_user_snr_db(vec![12.0, 12.0, 24.0, 24.0]);
        let cl = user_classes(&cfg);
        assert_eq!(cl.len(), 2);
        assert_eq!(cl[0].users, vec![0, 1]);
        assert_eq!(cl[1].label, "24dB");
    }

    #[test]
    fn early_stop_cuts_trials() {
        let cfg = SystemConfig::new(2, 1, 2, 2.0, 1)
            .unwrap()
            .with_grid(vec![10.0])
            .with_trials(50_000);
        let mut spec = ExperimentSpec::new(SchemeSelection::One(SchemeKind::Ideal), cfg);
        spec.early_stop = Some(0.05);
        let res = run_sweep(&spec).unwrap();
        let used = res[0].records[0].trials_used;
        assert!(used < 50_000 && used.is_multiple_of(CHUNK), "{used}");
    }
}
