//! Subadditive cocycles, good times, and the greedy interval decomposition.
//!
//! The central objects are [`SubadditiveCocycle`] (values `a(n, omega)` over
//! a two-sided symbolic driver), [`detect_good_times`] (the quadratic scan
//! for times at which the cocycle is nearly additive over all lags), and
//! [`greedy_decompose`] (the backward partition of `[0, N)` into unit steps
//! at good times and jumps across bad stretches).

pub mod cocycle;
pub mod decompose;
pub mod goodtimes;

pub use cocycle::{
    check_subadditivity, estimate_drift, CocycleSource, DriftEstimate, SubadditiveCocycle,
    SubadditivityViolation, SUBADD_TOL,
};
pub use decompose::{
    decompose_from_report, greedy_decompose, DecompositionRecord, Interval, IntervalTag,
};
pub use goodtimes::{
    calibrate_delta, detect_good_times, observed_sup_schedule, upper_density, CalibrationOptions,
    DeltaSchedule, DensityStats, DetectionMode, GoodTimeReport, DELTA_FLOOR, DETECT_TOL,
};
