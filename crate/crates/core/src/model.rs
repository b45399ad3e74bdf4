//! System configuration, random channel / source generation and the uplink
//! MAC channel `Y = Σ_k √ρ_k H_k X_k + W`.

use serde::{Deserialize, Serialize};

use crate::rng::{self, Purpose};
use crate::{db_to_linear, CMatrix, Error, Result, C64};

/// The experiment contract: antenna counts, bandwidth efficiency, slot length,
/// SNR grid and Monte-Carlo budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of user terminals `K`.
    pub users: usize,
    /// Antennas per user terminal `N_t`.
    pub user_antennas: usize,
    /// Base-station antennas `M`.
    pub bs_antennas: usize,
    /// Bandwidth efficiency `b = T / S` (channel uses per source sample).
    pub b: f64,
    /// Source samples per user per slot `S`.
    pub source_len: usize,
    /// Channel uses per slot `T`.
    pub slot_len: usize,
    pub snr_db_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Optional per-user nominal SNRs (asymmetric scenario).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_snr_db: Option<Vec<f64>>,
}

impl SystemConfig {
    /// Builds a configuration with `T = b·S`; fails unless `b·S` is an integer.
    pub fn new(
        users: usize,
        user_antennas: usize,
        bs_antennas: usize,
        b: f64,
        source_len: usize,
    ) -> Result<Self> {
        let t = b * source_len as f64;
        let slot_len = t.round();
        if !(b > 0.0) || (t - slot_len).abs() > 1e-9 || slot_len < 1.0 {
            return Err(Error::Config(format!(
                "b·S = {b}·{source_len} is not a positive integer slot length"
            )));
        }
        let cfg = SystemConfig {
            users,
            user_antennas,
            bs_antennas,
            b,
            source_len,
            slot_len: slot_len as usize,
            snr_db_grid: Vec::new(),
            trials: 1,
            seed: 0,
            per_user_snr_db: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_grid(mut self, snr_db_grid: Vec<f64>) -> Self {
        self.snr_db_grid = snr_db_grid;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_per_user_snr_db(mut self, snr: Vec<f64>) -> Self {
        self.per_user_snr_db = Some(snr);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.users == 0 || self.user_antennas == 0 || self.bs_antennas == 0 {
            return bad("K, N_t and M must all be at least 1".into());
        }
        if self.source_len == 0 {
            return bad("S must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let t = self.b * self.source_len as f64;
        if (t - self.slot_len as f64).abs() > 1e-9 {
            return bad(format!(
                "T = {} does not equal b·S = {}·{}",
                self.slot_len, self.b, self.source_len
            ));
        }
        if let Some(p) = &self.per_user_snr_db {
            if p.len() != self.users {
                return bad(format!(
                    "per_user_snr_db has {} entries for K = {}",
                    p.len(),
                    self.users
                ));
            }
        }
        Ok(())
    }

    /// Total transmit antennas `K·N_t`.
    pub fn stacked_antennas(&self) -> usize {
        self.users * self.user_antennas
    }

    /// Per-user linear SNRs at grid point `snr_db`. With per-user overrides the
    /// grid value acts as an offset added to each user's nominal SNR.
    pub fn user_snrs_db(&self, snr_db: f64) -> Vec<f64> {
        match &self.per_user_snr_db {
            Some(p) => p.iter().map(|s| s + snr_db).collect(),
            None => vec![snr_db; self.users],
        }
    }

    pub fn user_snrs_linear(&self, snr_db: f64) -> Vec<f64> {
        self.user_snrs_db(snr_db)
            .into_iter()
            .map(db_to_linear)
            .collect()
    }
}

/// Per-trial channel `H = [H_1 … H_K]` (M × K·N_t) and noise `W` (M × T).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub w: CMatrix,
}

impl ChannelRealization {
    /// Columns of user `k`'s channel block.
    pub fn user_block(&self, k: usize, user_antennas: usize) -> CMatrix {
        self.h
            .columns(k * user_antennas, user_antennas)
            .into_owned()
    }

    /// Same channel, zero noise.
    pub fn noiseless(&self) -> Self {
        ChannelRealization {
            h: self.h.clone(),
            w: CMatrix::zeros(self.w.nrows(), self.w.ncols()),
        }
    }
}

/// K × S matrix of unit-variance complex Gaussian source symbols, user-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlock {
    pub samples: CMatrix,
}

/// Aggregate distortion at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRecord {
    pub snr_db: f64,
    /// Mean `|ŝ − s|²` per complex sample, per user.
    pub per_user_mse: Vec<f64>,
    pub per_user_mse_stderr: Vec<f64>,
    /// Fraction of trials with at least one symbol decision error.
    pub decode_error_rate: f64,
    pub trials_used: usize,
}

impl DistortionRecord {
    /// Mean over the given users of their per-user MSE.
    pub fn mean_mse(&self, users: &[usize]) -> f64 {
        users.iter().map(|&k| self.per_user_mse[k]).sum::<f64>() / users.len() as f64
    }
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64, index: u64, purpose: Purpose) -> CMatrix {
    let mut rng = rng::stream(seed, index, purpose);
    CMatrix::from_fn(rows, cols, |_, _| rng::complex_normal(&mut rng))
}

/// Channel matrix `H` for one trial (no noise).
pub fn draw_channel_matrix(cfg: &SystemConfig, trial_index: u64) -> CMatrix {
    gaussian_matrix(
        cfg.bs_antennas,
        cfg.stacked_antennas(),
        cfg.seed,
        trial_index,
        Purpose::Channel,
    )
}

/// Draws `(H, W)` for a trial; a deterministic function of `(cfg.seed, trial_index)`.
pub fn draw_channel(cfg: &SystemConfig, trial_index: u64) -> ChannelRealization {
    ChannelRealization {
        h: draw_channel_matrix(cfg, trial_index),
        w: gaussian_matrix(
            cfg.bs_antennas,
            cfg.slot_len,
            cfg.seed,
            trial_index,
            Purpose::Noise,
        ),
    }
}

pub fn draw_source(cfg: &SystemConfig, trial_index: u64) -> SourceBlock {
    SourceBlock {
        samples: gaussian_matrix(
            cfg.users,
            cfg.source_len,
            cfg.seed,
            trial_index,
            Purpose::Source,
        ),
    }
}

/// `Y = Σ_k √ρ_k H_k X_k + W`, with `X` stacked as (K·N_t) × T.
///
/// The number of users is `rho_per_user.len()`; each user owns
/// `H.ncols() / K` consecutive columns of `H` and rows of `X`.
pub fn apply_mac_channel(
    x_stack: &CMatrix,
    chan: &ChannelRealization,
    rho_per_user: &[f64],
) -> Result<CMatrix> {
    let (m, n) = chan.h.shape();
    if x_stack.nrows() != n {
        return Err(Error::dim("apply_mac_channel rows", n, x_stack.nrows()));
    }
    if x_stack.ncols() != chan.w.ncols() || chan.w.nrows() != m {
        return Err(Error::dim(
            "apply_mac_channel columns",
            format!("{}x{}", m, x_stack.ncols()),
            format!("{}x{}", chan.w.nrows(), chan.w.ncols()),
        ));
    }
    let k = rho_per_user.len();
    if k == 0 || n % k != 0 {
        return Err(Error::dim("apply_mac_channel users", "a divisor of K·N_t", k));
    }
    let nt = n / k;
    let mut y = chan.w.clone();
    for c in 0..n {
        let amp = rho_per_user[c / nt].sqrt();
        for t in 0..x_stack.ncols() {
            let xs = x_stack[(c, t)] * amp;
            if xs == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..m {
                y[(i, t)] += chan.h[(i, c)] * xs;
            }
        }
    }
    Ok(y)
}
