//! Channel-state feedback over the block-fading MIMO multiple-access channel.
//!
//! The crate bundles three layers:
//!
//! * [`model`], [`quantizer`] and [`phy`] hold the link-level pieces: Rayleigh
//!   block-fading channels, a uniform scalar quantizer, Gray-mapped square QAM,
//!   joint ML / sphere / SIC detectors and the LMMSE estimator.
//! * [`schemes`] chains them into end-to-end feedback pipelines (analog,
//!   separated digital, hybrid digital-analog and the zero-error reference).
//! * [`exponents`] evaluates the analytic distortion-SNR exponents, and
//!   [`harness`] drives SNR sweeps, fits empirical slopes and writes CSV.
//!
//! Every Monte-Carlo quantity is a pure function of `(seed, trial_index)`, so
//! sweeps are reproducible bit-for-bit regardless of thread count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exponents;
pub mod harness;
pub mod model;
pub mod phy;
pub mod quantizer;
pub mod rng;
pub mod schemes;
mod stats;

pub use error::{Error, Result};
pub use model::{ChannelRealization, DistortionRecord, SourceBlock, SystemConfig};

/// Complex baseband sample, stored as an `(re, im)` pair of `f64`.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix used for channels, noise and signal blocks.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Converts an SNR in dB to its linear value.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear SNR to dB.
#[inline]
pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
