//! End-to-end feedback pipelines for one slot.
//!
//! Every scheme maps a trial's source block through the uplink channel and
//! returns the base station's reconstruction. The simulated pipelines use
//! single-antenna users (`N_t = 1`).

use rand::Rng;

use crate::model::{apply_mac_channel, draw_channel, draw_source, ChannelRealization};
use crate::phy::{lmmse_estimate, JointDetector, QamSpec, RateSchedule, SphereMode};
use crate::quantizer::{push_bits, QuantizerSpec};
use crate::rng::{self, Purpose};
use crate::{db_to_linear, CMatrix, Error, Result, SourceBlock, SystemConfig, C64};

/// Result of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    /// K × S reconstruction of the source block.
    pub reconstructions: CMatrix,
    /// Whether any digital symbol decision was wrong.
    pub digital_error: bool,
    /// Per-user `Σ_s |ŝ − s|²` over the slot.
    pub per_user_se: Vec<f64>,
    /// Per-user transmitted energy `‖X_i‖²_F` over the slot.
    pub tx_energy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Analog,
    Separated,
    Hybrid,
    Ideal,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::Analog,
        SchemeKind::Separated,
        SchemeKind::Hybrid,
        SchemeKind::Ideal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Analog => "analog",
            SchemeKind::Separated => "separated",
            SchemeKind::Hybrid => "hybrid",
            SchemeKind::Ideal => "ideal",
        }
    }

    pub fn is_digital(self) -> bool {
        !matches!(self, SchemeKind::Analog)
    }

    /// Channel uses per source sample seen by the digital layer, which sets
    /// `R_s = b_eff·R_c`.
    pub fn digital_b(self, cfg: &SystemConfig) -> Result<f64> {
        match self {
            SchemeKind::Hybrid => {
                let layout = HybridLayout::new(cfg)?;
                Ok(layout.t_d as f64 / cfg.source_len as f64)
            }
            _ => Ok(cfg.b),
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// Split of the slot between the digital layer and the analog refinement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridLayout {
    /// Antennas per user used for the analog part, `N_t' = min(N_t, ⌊M/K⌋)`.
    pub nt_prime: usize,
    /// Digital channel uses `T_d`.
    pub t_d: usize,
    /// Analog channel uses `T_a = S / N_t'`.
    pub t_a: usize,
    /// Stacked-column indices carrying the analog part (first `N_t'` antennas of each user).
    pub antenna_subset: Vec<usize>,
}

impl HybridLayout {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let k = cfg.users;
        let nt_prime = cfg.user_antennas.min(cfg.bs_antennas / k);
        if nt_prime == 0 {
            return Err(Error::Config(format!(
                "hybrid scheme needs M >= K, got M = {} and K = {k}",
                cfg.bs_antennas
            )));
        }
        if !cfg.source_len.is_multiple_of(nt_prime) {
            return Err(Error::Config(format!(
                "S = {} is not divisible by N_t' = {nt_prime}",
                cfg.source_len
            )));
        }
        let t_a = cfg.source_len / nt_prime;
        if t_a > cfg.slot_len {
            return Err(Error::Config(format!(
                "analog part needs {t_a} uses but the slot has T = {}",
                cfg.slot_len
            )));
        }
        let antenna_subset = (0..k)
            .flat_map(|u| (0..nt_prime).map(move |a| u * cfg.user_antennas + a))
            .collect();
        Ok(HybridLayout {
            nt_prime,
            t_d: cfg.slot_len - t_a,
            t_a,
            antenna_subset,
        })
    }
}

/// SNRs and per-user rate schedules at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub snr_db: f64,
    /// Per-user linear SNR `ρ_k`.
    pub rho: Vec<f64>,
    /// Per-user schedule; empty for the analog scheme.
    pub schedules: Vec<RateSchedule>,
}

impl OperatingPoint {
    /// Point without a digital layer.
    pub fn analog(cfg: &SystemConfig, snr_db: f64) -> Self {
        OperatingPoint {
            snr_db,
            rho: cfg.user_snrs_linear(snr_db),
            schedules: Vec::new(),
        }
    }

    /// The same schedule for every user.
    pub fn uniform(cfg: &SystemConfig, snr_db: f64, schedule: RateSchedule) -> Self {
        OperatingPoint {
            snr_db,
            rho: cfg.user_snrs_linear(snr_db),
            schedules: vec![schedule; cfg.users],
        }
    }

    /// Each user scheduled at gain `r_c` from its own SNR.
    pub fn scheduled(cfg: &SystemConfig, snr_db: f64, r_c: f64, b_eff: f64) -> Result<Self> {
        let schedules = cfg
            .user_snrs_db(snr_db)
            .into_iter()
            .map(|db| crate::phy::rate_schedule(db, r_c, b_eff))
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatingPoint {
            snr_db,
            rho: cfg.user_snrs_db(snr_db).into_iter().map(db_to_linear).collect(),
            schedules,
        })
    }
}

fn require_single_antenna(cfg: &SystemConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.user_antennas != 1 {
        return Err(Error::Config(format!(
            "simulated schemes use single-antenna users, got N_t = {}",
            cfg.user_antennas
        )));
    }
    Ok(())
}

fn check_point(cfg: &SystemConfig, op: &OperatingPoint, digital: bool) -> Result<()> {
    if op.rho.len() != cfg.users {
        return Err(Error::dim("operating point SNRs", cfg.users, op.rho.len()));
    }
    if digital && op.schedules.len() != cfg.users {
        return Err(Error::dim("operating point schedules", cfg.users, op.schedules.len()));
    }
    Ok(())
}

fn squared_errors(src: &SourceBlock, rec: &CMatrix) -> Vec<f64> {
    (0..src.samples.nrows())
        .map(|u| {
            (0..src.samples.ncols())
                .map(|j| (src.samples[(u, j)] - rec[(u, j)]).norm_sqr())
                .sum()
        })
        .collect()
}

fn row_energy(x: &CMatrix) -> Vec<f64> {
    (0..x.nrows())
        .map(|u| x.row(u).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// Quantized and scrambled digital payload of all users for one slot.
struct DigitalPayload {
    quantizers: Vec<QuantizerSpec>,
    qams: Vec<QamSpec>,
    /// K × S quantizer reconstructions at the transmitters.
    quantized: CMatrix,
    /// Per-user scrambling mask.
    masks: Vec<Vec<bool>>,
    /// Transmitted symbol indices, `[use][user]`.
    sent: Vec<Vec<usize>>,
    /// K × uses transmitted symbols.
    x: CMatrix,
}

fn encode_digital(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    src: &SourceBlock,
    trial: u64,
    uses: usize,
) -> Result<DigitalPayload> {
    let k = cfg.users;
    let s = cfg.source_len;
    let mut quantizers = Vec::with_capacity(k);
    let mut qams = Vec::with_capacity(k);
    for (u, sched) in op.schedules.iter().enumerate() {
        let source_bits = s * sched.source_bits as usize;
        let channel_bits = uses * sched.channel_bits as usize;
        if source_bits != channel_bits {
            return Err(Error::Config(format!(
                "user {u}: S·R_s = {s}·{} does not equal {uses}·R_c = {uses}·{}",
                sched.source_bits, sched.channel_bits
            )));
        }
        quantizers.push(sched.quantizer()?);
        qams.push(sched.qam());
    }
    let mut scramble = rng::stream(cfg.seed, trial, Purpose::Scramble);
    let mut quantized = CMatrix::zeros(k, s);
    let mut masks = Vec::with_capacity(k);
    let mut sent = vec![vec![0usize; k]; uses];
    let mut x = CMatrix::zeros(k, uses);
    for u in 0..k {
        let q = &quantizers[u];
        let mut bits = Vec::with_capacity(s * q.bits_per_complex as usize);
        for j in 0..s {
            let (ii, iq) = q.indices(src.samples[(u, j)]);
            quantized[(u, j)] = q.reconstruct(ii, iq);
            push_bits(&mut bits, ii, q.bits_i);
            push_bits(&mut bits, iq, q.bits_q);
        }
        let mask: Vec<bool> = (0..bits.len()).map(|_| scramble.random::<bool>()).collect();
        for (b, m) in bits.iter_mut().zip(&mask) {
            *b ^= *m;
        }
        let rc = qams[u].bits_per_symbol() as usize;
        for t in 0..uses {
            let idx = qams[u].gray_index(&bits[t * rc..(t + 1) * rc])?;
            sent[t][u] = idx;
            x[(u, t)] = qams[u].symbol(idx);
        }
        masks.push(mask);
    }
    Ok(DigitalPayload {
        quantizers,
        qams,
        quantized,
        masks,
        sent,
        x,
    })
}

/// Sphere-decodes every use of `y` (M × uses) and rebuilds the K × S
/// quantizer reconstructions; returns them with the digital error flag.
fn decode_digital(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    payload: &DigitalPayload,
    h: &CMatrix,
    y: &CMatrix,
) -> Result<(CMatrix, bool)> {
    let k = cfg.users;
    let det = JointDetector::new(h, &op.rho, &payload.qams)?;
    let mut bits: Vec<Vec<bool>> = vec![Vec::new(); k];
    let mut error = false;
    for t in 0..y.ncols() {
        let yt: Vec<C64> = y.column(t).iter().copied().collect();
        let found = det.sphere(&yt, SphereMode::Constellation)?.indices;
        error |= found != payload.sent[t];
        for u in 0..k {
            bits[u].extend(payload.qams[u].gray_bits(found[u]));
        }
    }
    let mut rec = CMatrix::zeros(k, cfg.source_len);
    for u in 0..k {
        for (b, m) in bits[u].iter_mut().zip(&payload.masks[u]) {
            *b ^= *m;
        }
        let rs = payload.quantizers[u].bits_per_complex as usize;
        for j in 0..cfg.source_len {
            rec[(u, j)] = payload.quantizers[u].dequantize(&bits[u][j * rs..(j + 1) * rs])?;
        }
    }
    Ok((rec, error))
}

/// Separated source-channel coding on the trial's own channel draw.
pub fn run_separated(cfg: &SystemConfig, op: &OperatingPoint, trial: u64) -> Result<SchemeOutcome> {
    run_separated_on(cfg, op, trial, &draw_channel(cfg, trial))
}

/// Separated scheme over a given channel realization: quantize, scramble,
/// Gray-map one QAM symbol per user per use, sphere-decode each use jointly,
/// and reconstruct without error detection.
pub fn run_separated_on(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    trial: u64,
    chan: &ChannelRealization,
) -> Result<SchemeOutcome> {
    require_single_antenna(cfg)?;
    check_point(cfg, op, true)?;
    let src = draw_source(cfg, trial);
    let payload = encode_digital(cfg, op, &src, trial, cfg.slot_len)?;
    let y = apply_mac_channel(&payload.x, chan, &op.rho)?;
    let (rec, digital_error) = decode_digital(cfg, op, &payload, &chan.h, &y)?;
    Ok(SchemeOutcome {
        per_user_se: squared_errors(&src, &rec),
        tx_energy: row_energy(&payload.x),
        reconstructions: rec,
        digital_error,
    })
}

/// Quantization alone, as if an error-free channel code delivered every bit.
pub fn ideal_reference(cfg: &SystemConfig, op: &OperatingPoint, trial: u64) -> Result<SchemeOutcome> {
    require_single_antenna(cfg)?;
    check_point(cfg, op, true)?;
    let src = draw_source(cfg, trial);
    let mut rec = CMatrix::zeros(cfg.users, cfg.source_len);
    for (u, sched) in op.schedules.iter().enumerate() {
        let q = sched.quantizer()?;
        for j in 0..cfg.source_len {
            let (ii, iq) = q.indices(src.samples[(u, j)]);
            rec[(u, j)] = q.reconstruct(ii, iq);
        }
    }
    Ok(SchemeOutcome {
        per_user_se: squared_errors(&src, &rec),
        tx_energy: vec![0.0; cfg.users],
        reconstructions: rec,
        digital_error: false,
    })
}

/// Analog time-division layout: users `2p, 2p+1` form pair `p`, use `t` belongs
/// to pair `t mod (K/2)`, and each pair repeats its `S` samples `L` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalogLayout {
    pub pairs: usize,
    /// Uses per pair `T_p = 2T/K`.
    pub uses_per_pair: usize,
    /// Repetitions `L = T_p / S`.
    pub repetitions: usize,
}

impl AnalogLayout {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let k = cfg.users;
        if !k.is_multiple_of(2) {
            return Err(Error::Config(format!("analog pairing needs an even K, got {k}")));
        }
        if cfg.bs_antennas < 2 {
            return Err(Error::Config("analog pairing needs M >= 2".into()));
        }
        let pairs = k / 2;
        if !cfg.slot_len.is_multiple_of(pairs) {
            return Err(Error::Config(format!(
                "T = {} uses cannot be split evenly among {pairs} pairs",
                cfg.slot_len
            )));
        }
        let uses_per_pair = cfg.slot_len / pairs;
        if !uses_per_pair.is_multiple_of(cfg.source_len) {
            return Err(Error::Config(format!(
                "a pair's {uses_per_pair} uses are not a multiple of S = {}",
                cfg.source_len
            )));
        }
        Ok(AnalogLayout {
            pairs,
            uses_per_pair,
            repetitions: uses_per_pair / cfg.source_len,
        })
    }
}

/// Uncoded analog transmission, two users at a time, with power boosted by
/// `T / T_p` on active uses so that `E‖X_i‖² = T`, and joint LMMSE over all
/// repetitions of a pair.
pub fn run_analog(cfg: &SystemConfig, op: &OperatingPoint, trial: u64) -> Result<SchemeOutcome> {
    run_analog_on(cfg, op, trial, &draw_channel(cfg, trial))
}

pub fn run_analog_on(
    cfg: &SystemConfig,
    op: &OperatingPoint,
    trial: u64,
    chan: &ChannelRealization,
) -> Result<SchemeOutcome> {
    require_single_antenna(cfg)?;
    check_point(cfg, op, false)?;
    let layout = AnalogLayout::new(cfg)?;
    let src = draw_source(cfg, trial);
    let (k, s, t_total, m) = (cfg.users, cfg.source_len, cfg.slot_len, cfg.bs_antennas);
    let boost = (t_total as f64 / layout.uses_per_pair as f64).sqrt();
    let mut x = CMatrix::zeros(k, t_total);
    for t in 0..t_total {
        let p = t % layout.pairs;
        let sample = (t / layout.pairs) % s;
        for u in [2 * p, 2 * p + 1] {
            x[(u, t)] = src.samples[(u, sample)] * boost;
        }
    }
    let y = apply_mac_channel(&x, chan, &op.rho)?;
    let mut rec = CMatrix::zeros(k, s);
    for p in 0..layout.pairs {
        let users = [2 * p, 2 * p + 1];
        let l = layout.repetitions;
        let h_stack = CMatrix::from_fn(m * l, 2, |i, c| chan.h[(i % m, users[c])]);
        let mut y_stack = CMatrix::zeros(m * l, s);
        for a in 0..layout.uses_per_pair {
            let t = a * layout.pairs + p;
            let (rep, sample) = (a / s, a % s);
            for i in 0..m {
                y_stack[(rep * m + i, sample)] = y[(i, t)];
            }
        }
        let rho: Vec<f64> = users.iter().map(|&u| op.rho[u] * boost * boost).collect();
        let est = lmmse_estimate(&y_stack, &h_stack, &rho)?.estimate;
        for (c, &u) in users.iter().enumerate() {
            for j in 0..s {
                rec[(u, j)] = est[(c, j)];
            }
        }
    }
    Ok(SchemeOutcome {
        per_user_se: squared_errors(&src, &rec),
        tx_energy: row_energy(&x),
        reconstructions: rec,
        digital_error: false,
    })
}

/// Hybrid digital-analog feedback: the quantized source goes over `T_d`
/// digital uses, then the quantization error, scaled to unit variance by
/// `1/√D_Q`, is sent uncoded over `T_a` uses and refined by LMMSE after the
/// digital part is decoded. With `T_d = 0` the source itself is sent.
pub fn run_hybrid(
    cfg: &SystemConfig,
    layout: &HybridLayout,
    op: &OperatingPoint,
    trial: u64,
) -> Result<SchemeOutcome> {
    run_hybrid_on(cfg, layout, op, trial, &draw_channel(cfg, trial))
}

pub fn run_hybrid_on(
    cfg: &SystemConfig,
    layout: &HybridLayout,
    op: &OperatingPoint,
    trial: u64,
    chan: &ChannelRealization,
) -> Result<SchemeOutcome> {
    require_single_antenna(cfg)?;
    if *layout != HybridLayout::new(cfg)? {
        return Err(Error::Config("hybrid layout does not match the configuration".into()));
    }
    let digital = layout.t_d > 0;
    check_point(cfg, op, digital)?;
    let src = draw_source(cfg, trial);
    let (k, s) = (cfg.users, cfg.source_len);

    let (payload, scale) = if digital {
        let payload = encode_digital(cfg, op, &src, trial, layout.t_d)?;
        let dq: Vec<f64> = payload
            .quantizers
            .iter()
            .map(|q| q.expected_distortion().sqrt())
            .collect();
        (Some(payload), dq)
    } else {
        (None, vec![1.0; k])
    };

    let mut x = CMatrix::zeros(k, cfg.slot_len);
    if let Some(p) = &payload {
        x.columns_mut(0, layout.t_d).copy_from(&p.x);
    }
    for u in 0..k {
        for j in 0..s {
            let base = payload.as_ref().map_or(C64::new(0.0, 0.0), |p| p.quantized[(u, j)]);
            x[(u, layout.t_d + j)] = (src.samples[(u, j)] - base) / scale[u];
        }
    }
    let y = apply_mac_channel(&x, chan, &op.rho)?;

    let (mut rec, digital_error) = match &payload {
        Some(p) => {
            let yd = y.columns(0, layout.t_d).into_owned();
            decode_digital(cfg, op, p, &chan.h, &yd)?
        }
        None => (CMatrix::zeros(k, s), false),
    };
    let ya = y.columns(layout.t_d, layout.t_a).into_owned();
    let refine = lmmse_estimate(&ya, &chan.h, &op.rho)?.estimate;
    for u in 0..k {
        for j in 0..s {
            rec[(u, j)] += refine[(u, j)] * scale[u];
        }
    }
    Ok(SchemeOutcome {
        per_user_se: squared_errors(&src, &rec),
        tx_energy: row_energy(&x),
        reconstructions: rec,
        digital_error,
    })
}

/// Dispatches one trial of `kind`.
pub fn run_scheme(
    kind: SchemeKind,
    cfg: &SystemConfig,
    op: &OperatingPoint,
    trial: u64,
) -> Result<SchemeOutcome> {
    match kind {
        SchemeKind::Analog => run_analog(cfg, op, trial),
        SchemeKind::Separated => run_separated(cfg, op, trial),
        SchemeKind::Hybrid => run_hybrid(cfg, &HybridLayout::new(cfg)?, op, trial),
        SchemeKind::Ideal => ideal_reference(cfg, op, trial),
    }
}
