//! SNR-dependent rate schedule for the digital feedback layer.

use super::qam::QamSpec;
use crate::quantizer::QuantizerSpec;
use crate::{Error, Result};

/// Rates used at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    /// Channel multiplexing gain `r_c`.
    pub r_c: f64,
    /// Source multiplexing gain `r_s = b·r_c`.
    pub r_s: f64,
    /// Bits per channel use per user `R_c` (even, ≥ 2).
    pub channel_bits: u32,
    /// Bits per complex source sample `R_s = b·R_c`.
    pub source_bits: u32,
    /// QAM side `Q = 2^{R_c/2}`.
    pub q: u32,
}

impl RateSchedule {
    /// Schedule with a fixed `R_c`, independent of SNR.
    pub fn fixed(channel_bits: u32, b: f64) -> Result<Self> {
        if channel_bits < 2 || !channel_bits.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "R_c = {channel_bits} must be an even integer >= 2"
            )));
        }
        let rs = b * channel_bits as f64;
        let source_bits = rs.round();
        if !(b > 0.0) || (rs - source_bits).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "R_s = b·R_c = {b}·{channel_bits} is not an integer"
            )));
        }
        Ok(RateSchedule {
            r_c: 0.0,
            r_s: 0.0,
            channel_bits,
            source_bits: source_bits as u32,
            q: 1 << (channel_bits / 2),
        })
    }

    pub fn qam(&self) -> QamSpec {
        QamSpec::new(self.q).expect("schedule always holds a valid QAM size")
    }

    pub fn quantizer(&self) -> Result<QuantizerSpec> {
        QuantizerSpec::new(self.source_bits)
    }
}

/// Target `R_c* = r_c·log₂ρ`, rounded to the nearest even integer (halves
/// round up) and clamped to at least 2; `R_s = b·R_c`.
pub fn rate_schedule(rho_db: f64, r_c: f64, b: f64) -> Result<RateSchedule> {
    if !(r_c >= 0.0) || !r_c.is_finite() {
        return Err(Error::Domain(format!("r_c = {r_c} must be non-negative")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("b = {b} must be positive")));
    }
    let target = r_c * rho_db / (10.0 * 2f64.log10());
    let even = 2.0 * (target / 2.0 + 0.5).floor();
    let channel_bits = even.clamp(2.0, 30.0) as u32;
    let mut s = RateSchedule::fixed(channel_bits, b)?;
    s.r_c = r_c;
    s.r_s = b * r_c;
    Ok(s)
}
