use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use macfeedback::exponents::write_curves_csv;
use macfeedback::harness::output::{analytic_curves, write_slopes_csv};
use macfeedback::harness::{
    emit_curves, rows_from_results, run_asymmetric, run_sweep, write_rows_csv, ExperimentSpec,
    RatePolicy, SchemeSelection, SweepResult,
};
use macfeedback::phy::{
    min_distance_experiment, qam_error_rate_sweep, DetectorKind, FrontEnd, SicOrdering,
};
use macfeedback::{Error, SystemConfig};

#[derive(Parser)]
#[command(name = "macfeedback", version, about = "CSI feedback simulator for the MIMO multiple-access channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distortion-vs-SNR sweep with symmetric user SNRs.
    Sweep(SweepArgs),
    /// Sweep with per-user nominal SNRs; grid values are offsets.
    Asymmetric(AsymArgs),
    /// Analytic exponent curves over b ∈ [1, 10].
    Curves(CurveArgs),
    /// Error rate of uncoded QAM at multiplexing gain r.
    DmtExperiment(DmtArgs),
    /// Empirical CDF of the lattice minimum distance.
    Mindist(MindistArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Experiment spec file (flat key = value or JSON); flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// analog, separated, hybrid, ideal or all.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "Nt")]
    nt: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    /// Source samples per slot; defaults to the smallest S with integer T = b·S ≥ K.
    #[arg(long = "S")]
    s: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// auto, or fixed:<r_c>.
    #[arg(long)]
    rc: Option<String>,
    /// Relative standard error that ends a grid point early, or `off`.
    #[arg(long = "early-stop")]
    early_stop: Option<String>,
    /// Fit the slope over lo,hi dB instead of the upper half of the grid.
    #[arg(long = "fit-range", value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    fit_range: Option<Vec<f64>>,
    /// Directory for results.csv, slopes.csv, exponents.csv and spec.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sys: SystemArgs,
}

#[derive(Args)]
struct AsymArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// Comma-separated nominal SNR per user in dB.
    #[arg(long = "per-user-snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    per_user_snr_db: Option<Vec<f64>>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    #[arg(long = "M", default_value_t = 4)]
    m: usize,
    #[arg(long = "Nt", default_value_t = 1)]
    nt: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Detector {
    Ml,
    Zf,
    Mmse,
    ZfVblast,
    MmseVblast,
}

impl Detector {
    fn kind(self) -> DetectorKind {
        match self {
            Detector::Ml => DetectorKind::Ml,
            Detector::Zf => DetectorKind::Sic(FrontEnd::Zf, SicOrdering::Natural),
            Detector::Mmse => DetectorKind::Sic(FrontEnd::Mmse, SicOrdering::Natural),
            Detector::ZfVblast => DetectorKind::Sic(FrontEnd::Zf, SicOrdering::VBlast),
            Detector::MmseVblast => DetectorKind::Sic(FrontEnd::Mmse, SicOrdering::VBlast),
        }
    }
}

#[derive(Args)]
struct DmtArgs {
    /// Users and receive antennas.
    #[arg(long = "M", default_value_t = 2)]
    m: usize,
    /// Multiplexing gain.
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    #[arg(
        long = "snr-db",
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "6,8,10,12,14,16"
    )]
    snr_db: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Detector::Ml)]
    detector: Detector,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MindistArgs {
    /// Lattice dimension (1 to 3).
    #[arg(long = "N", default_value_t = 2)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.07,0.1,0.14,0.2,0.28,0.4")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

const DEFAULT_GRID: [f64; 3] = [12.0412, 18.0618, 24.0824];
const DEFAULT_OFFSETS: [f64; 3] = [0.0, 6.0, 12.0412];
const DEFAULT_PER_USER: [f64; 4] = [12.0412, 12.0412, 24.0824, 24.0824];

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_rate(s: &str) -> Result<RatePolicy, Error> {
    let bad = || config_error(format!("--rc expects `auto` or `fixed:<r_c>`, got `{s}`"));
    match s {
        "auto" => Ok(RatePolicy::Auto),
        _ => {
            let v = s.strip_prefix("fixed:").or_else(|| s.strip_prefix("fixed=")).unwrap_or(s);
            let r: f64 = v.parse().map_err(|_| bad())?;
            if r > 0.0 && r.is_finite() {
                Ok(RatePolicy::Fixed(r))
            } else {
                Err(bad())
            }
        }
    }
}

/// Smallest `S` for which `b·S` is an integer and there are at least `K`
/// channel uses per slot.
fn default_source_len(b: f64, k: usize) -> Result<usize, Error> {
    (1..=64)
        .find(|&s| {
            let t = b * s as f64;
            (t - t.round()).abs() < 1e-9 && t.round() as usize >= k.max(1)
        })
        .or_else(|| (1..=64).find(|&s| ((b * s as f64) - (b * s as f64).round()).abs() < 1e-9))
        .ok_or_else(|| config_error(format!("no S ≤ 64 makes b·S an integer for b = {b}")))
}

fn build_spec(a: &SystemArgs, default_grid: &[f64]) -> Result<ExperimentSpec, Error> {
    let base = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Parse {
                line: 0,
                field: "spec".into(),
                message: format!("{}: {e}", path.display()),
            })?;
            Some(ExperimentSpec::parse(&text)?)
        }
        None => None,
    };
    let prev = base.as_ref().map(|s| &s.cfg);
    let k = a.k.or(prev.map(|c| c.users)).unwrap_or(4);
    let m = a.m.or(prev.map(|c| c.bs_antennas)).unwrap_or(4);
    let nt = a.nt.or(prev.map(|c| c.user_antennas)).unwrap_or(1);
    let b = a.b.or(prev.map(|c| c.b)).unwrap_or(4.0);
    let s = match a.s.or(prev.filter(|c| a.b.is_none() || c.b == b).map(|c| c.source_len)) {
        Some(s) => s,
        None => default_source_len(b, k)?,
    };
    let grid = a
        .snr_db
        .clone()
        .or(prev.map(|c| c.snr_db_grid.clone()))
        .unwrap_or_else(|| default_grid.to_vec());
    let mut cfg = SystemConfig::new(k, nt, m, b, s)?
        .with_grid(grid)
        .with_trials(a.trials.or(prev.map(|c| c.trials)).unwrap_or(100_000))
        .with_seed(a.seed.or(prev.map(|c| c.seed)).unwrap_or(1));
    cfg.per_user_snr_db = prev.and_then(|c| c.per_user_snr_db.clone());

    let scheme: SchemeSelection = match (&a.scheme, &base) {
        (Some(s), _) => s.parse()?,
        (None, Some(b)) => b.scheme,
        (None, None) => SchemeSelection::One(macfeedback::schemes::SchemeKind::Separated),
    };
    let mut spec = ExperimentSpec::new(scheme, cfg);
    spec.early_stop = Some(0.01);
    if let Some(b) = &base {
        spec.rate = b.rate;
        spec.output = b.output.clone();
        spec.early_stop = b.early_stop;
        spec.fit_range = b.fit_range;
    }
    if let Some(rc) = &a.rc {
        spec.rate = parse_rate(rc)?;
    }
    if let Some(e) = &a.early_stop {
        spec.early_stop = match e.as_str() {
            "off" | "none" => None,
            v => Some(
                v.parse::<f64>()
                    .ok()
                    .filter(|x| *x > 0.0)
                    .ok_or_else(|| config_error(format!("--early-stop expects a fraction or `off`, got `{v}`")))?,
            ),
        };
    }
    if let Some(r) = &a.fit_range {
        if r[0] >= r[1] {
            return Err(config_error("--fit-range needs lo < hi"));
        }
        spec.fit_range = Some((r[0], r[1]));
    }
    if let Some(o) = &a.out {
        spec.output = Some(o.clone());
    }
    spec.validate()?;
    Ok(spec)
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(io_error(&path))?;
    Ok(path)
}

fn stdout(text: &str) -> Result<(), Error> {
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(io_error(Path::new("<stdout>")))
}

fn report(spec: &ExperimentSpec, results: &[SweepResult]) -> Result<(), Error> {
    let c = &spec.cfg;
    match &spec.output {
        Some(dir) => {
            let mut paths = emit_curves(results, (c.users, c.user_antennas, c.bs_antennas), dir)?;
            paths.push(write_out(dir, "spec.txt", &spec.emit())?);
            for p in &paths {
                eprintln!("wrote {}", p.display());
            }
            stdout(&write_slopes_csv(results))
        }
        None => stdout(&write_rows_csv(&rows_from_results(results))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Sweep(a) => {
            let spec = build_spec(&a.sys, &DEFAULT_GRID)?;
            let results = run_sweep(&spec)?;
            report(&spec, &results)
        }
        Command::Asymmetric(a) => {
            let mut spec = build_spec(&a.sys, &DEFAULT_OFFSETS)?;
            if let Some(p) = a.per_user_snr_db {
                spec.cfg.per_user_snr_db = Some(p);
            } else if spec.cfg.per_user_snr_db.is_none() && spec.cfg.users == DEFAULT_PER_USER.len() {
                spec.cfg.per_user_snr_db = Some(DEFAULT_PER_USER.to_vec());
            }
            spec.validate()?;
            let results = run_asymmetric(&spec)?;
            report(&spec, &results)
        }
        Command::Curves(a) => {
            let curves = analytic_curves(a.k, a.nt, a.m)?;
            let mut buf = Vec::new();
            write_curves_csv(&mut buf, &curves).map_err(io_error(Path::new("<buffer>")))?;
            let text = String::from_utf8(buf).expect("ASCII CSV");
            match a.out {
                Some(dir) => {
                    let p = write_out(&dir, "exponents.csv", &text)?;
                    eprintln!("wrote {}", p.display());
                    Ok(())
                }
                None => stdout(&text),
            }
        }
        Command::DmtExperiment(a) => {
            let res = qam_error_rate_sweep(a.m, a.r, &a.snr_db, a.trials, a.seed, a.detector.kind())?;
            let mut text = String::from("snr_db,q,errors,trials,error_rate\n");
            for p in &res.points {
                text += &format!("{},{},{},{},{}\n", p.snr_db, p.q, p.errors, p.trials, p.error_rate);
            }
            eprintln!("slope {:.4} ± {:.4}", res.slope, res.slope_stderr);
            match a.out {
                Some(dir) => {
                    let p = write_out(&dir, "dmt.csv", &text)?;
                    eprintln!("wrote {}", p.display());
                    Ok(())
                }
                None => stdout(&text),
            }
        }
        Command::Mindist(a) => {
            let res = min_distance_experiment(a.n, a.trials, &a.eps, a.seed)?;
            let mut text = String::from("epsilon,probability,stderr\n");
            for ((e, p), s) in res.epsilons.iter().zip(&res.probabilities).zip(&res.stderrs) {
                text += &format!("{e},{p},{s}\n");
            }
            match res.loglog_slope() {
                Ok((s, se)) => eprintln!("log-log slope {s:.4} ± {se:.4}"),
                Err(e) => eprintln!("log-log slope unavailable: {e}"),
            }
            match a.out {
                Some(dir) => {
                    let p = write_out(&dir, "mindist.csv", &text)?;
                    eprintln!("wrote {}", p.display());
                    Ok(())
                }
                None => stdout(&text),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::FAILURE,
                _ => ExitCode::from(2),
            }
        }
    }
}
