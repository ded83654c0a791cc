//! Exact-arithmetic analysis of continuous piecewise monotone interval
//! maps.
//!
//! The crate provides four layers:
//!
//! - [`map`]: piecewise linear maps with exact rational breakpoints —
//!   evaluation, composition, iteration, lap counts and variation;
//! - [`entropy`]: growth-rate estimators (`lim (1/n) log ℓ(f^n)` via lap
//!   counts, and the matching variation rate) with certified upper
//!   bounds;
//! - [`kneading`] / [`series`]: the constructive linearization — the
//!   increasing surjection `π(x) = Λ([a,x])` built from truncated
//!   lap-count series, the uniformly piecewise linear model with slope
//!   `exp(h)`, and plateau diagnostics separating semi-conjugacy from
//!   conjugacy;
//! - [`structure`]: tent-family cycles, period-doubling renormalization,
//!   exact periodic points and basin statistics.
//!
//! Everything is immutable after construction; operations may be called
//! concurrently on shared maps, and grid-scale work parallelizes
//! internally.

pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod kneading;
pub mod map;
pub mod map_format;
pub mod scalar;
pub mod series;
pub mod structure;

pub use entropy::{entropy_of_uniform_pl, entropy_scan, EntropyRow, EntropySequence};
pub use error::{Error, Result};
pub use kneading::{
    build_pi, build_reduction, detect_plateaus, uniform_grid, Pi, Reduction, SampledMap,
};
pub use map::{compose, IntervalJ, PLMap, DEFAULT_NODE_CAP};
pub use map_format::{parse_map, write_map};
pub use scalar::Scalar;
pub use series::{lambda_ratio, series_l, Lambda, LapSeries, SeriesConfig, SeriesValue};
pub use structure::{
    cycle_period_exponent, escape_fraction, periodic_points, renormalize, tent, transitive_cycle,
    BetaValue, Cycle, Renormalization, TentParams,
};

/// Serde helper: exact scalars as `p/q` strings.
pub(crate) fn serialize_scalar<S: serde::Serializer>(
    x: &Scalar,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&scalar::format_scalar(x))
}
