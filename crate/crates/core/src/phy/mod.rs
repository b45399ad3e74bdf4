//! Modulation, detection and estimation.

pub mod detect;
pub mod experiments;
pub mod lmmse;
pub mod qam;
pub mod schedule;

pub use detect::{
    ml_joint_decode, sic_decode, sphere_decode, Detection, FrontEnd, JointDetector, SicOrdering,
    SphereMode,
};
pub use experiments::{
    lattice_min_distance, min_distance_experiment, qam_dmt_experiment, qam_error_rate_sweep,
    DetectorKind, MinDistanceResult, QamDmtResult,
};
pub use lmmse::{lmmse_estimate, mmse_trace, LmmseOutput};
pub use qam::QamSpec;
pub use schedule::{rate_schedule, RateSchedule};
