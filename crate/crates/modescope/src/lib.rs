//! Multiscale inference for geometric features (modes, monotonicity
//! regions) of a multivariate density from i.i.d. samples.
//!
//! The machinery works on *wedges*: truncated cones anchored at a candidate
//! point. Conditionally on the number of observations in a wedge, the
//! normalized projected distances of a uniform sample behave like uniform
//! order statistics, which yields distribution-free spacing statistics. The
//! crate provides:
//!
//! - [`geometry`]: wedges, direction sets, scale rules, and scan grids;
//! - [`statistics`]: the spacing statistics and their normalizations;
//! - [`nullsim`]: simulated null quantiles and empirical calibration;
//! - [`inference`]: the local mode test, the global monotonicity map, and
//!   grid-wide mode detection, plus closed-form parameter-guidance
//!   constants;
//! - [`univariate`]: the classical one-dimensional multiscale spacing test,
//!   kept as a cross-check;
//! - [`harness`]: simulation studies and a brute-force oracle for the
//!   conditional-uniformity property;
//! - [`io`]: CSV ingestion, the versioned `modescope/1` result schema, and
//!   SVG map rendering.
//!
//! All stochastic entry points take an explicit seed and produce
//! byte-identical results regardless of worker count.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod inference;
pub mod io;
pub mod nullsim;
pub mod rng;
pub mod statistics;
pub mod univariate;

pub use error::{Error, Result};
pub use geometry::{
    build_grid, default_scales, direction_set, scan_wedge, wedge_contains, Grid, Point, Sample,
    ScaleParams, Wedge, WedgeScan,
};
pub use inference::{
    critical_value, detect_modes, local_mode_test, monotonicity_map, theory_constants,
    ModeDetection, ModeTestResult, MonotonicityMap, ProcedureConfig, TheoryConstants,
    ThresholdMode, Verdict, WedgeDecision, WedgeFamily,
};
pub use nullsim::{
    calibrate, empirical_quantile, simulate_null, CalibrationConfig, NullConfig, NullFlavor,
    NullQuantile,
};
pub use statistics::{beta, gamma_penalty, statistic_subsection, statistic_wedge, SubsectionIndex};
