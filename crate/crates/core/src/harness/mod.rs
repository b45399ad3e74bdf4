//! Experiment driver: specification files, SNR sweeps, slope fits and CSV
//! output.

use std::ops::Range;

pub mod output;
pub mod spec;
pub mod sweep;

pub use output::{
    emit_curves, parse_rows_csv, rows_from_results, write_rows_csv, CurveRow, RESULTS_CSV_HEADER,
};
pub use spec::{ExperimentSpec, RatePolicy, SchemeSelection};
pub use sweep::{
    estimate_slope, operating_point, run_asymmetric, run_sweep, user_classes, SweepResult,
    UserClass,
};

/// Maps `f` over a trial range, preserving order.
pub fn par_map<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}
