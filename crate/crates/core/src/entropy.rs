//! Topological entropy estimators from lap counts and total variation.
//!
//! `log ℓ(f^n)` is subadditive in `n`, so `min_n (1/n) log ℓ(f^n)` is a
//! certified upper bound for the growth rate while the lap-count ratio
//! `ℓ(f^n)/ℓ(f^{n-1})` gives the point estimate. The variation column is
//! exact rational data and recovers the same rate for expanding maps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::{PLMap, DEFAULT_NODE_CAP};
use crate::scalar::{ln_scalar, Scalar};

/// One iterate's worth of growth data.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyRow {
    pub n: u32,
    pub laps: u64,
    pub log_laps_over_n: f64,
    #[serde(serialize_with = "crate::serialize_scalar")]
    pub variation: Scalar,
    pub log_var_over_n: f64,
}

/// Lap counts and variations of `f^1 … f^{max_n}` with derived entropy
/// bounds and estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EntropySequence {
    pub rows: Vec<EntropyRow>,
    /// Certified upper bound `min_n (1/n) log ℓ(f^n)`.
    pub h_upper: f64,
    /// Point estimate of the entropy.
    pub h_point: f64,
    /// `exp(h_point)`.
    pub beta: f64,
    /// `exp(-h_point)`.
    pub r: f64,
    /// Whether the scan stopped early at the breakpoint budget.
    pub truncated: bool,
    /// Numerical surrogate for `limsup (1/n) log Var(f^n) > 0`.
    pub variation_growth: bool,
}

/// Computes lap counts and variations for all iterates up to `max_n`,
/// stopping early (and flagging `truncated`) if the breakpoint budget
/// runs out.
pub fn entropy_scan_with_cap(f: &PLMap, max_n: u32, cap: usize) -> Result<EntropySequence> {
    if max_n < 2 {
        return Err(Error::Domain("entropy scan needs max_n >= 2".into()));
    }
    let mut rows = Vec::with_capacity(max_n as usize);
    let mut truncated = false;
    let mut acc = f.clone();
    for n in 1..=max_n {
        if n > 1 {
            match crate::map::compose(f, &acc) {
                Ok(next) if next.breakpoints().len() <= cap => acc = next,
                Ok(_) | Err(Error::Resource { .. }) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let laps = acc.lap_count();
        let variation = acc.variation();
        rows.push(EntropyRow {
            n,
            laps,
            log_laps_over_n: (laps as f64).ln() / n as f64,
            log_var_over_n: ln_scalar(&variation) / n as f64,
            variation,
        });
    }
    Ok(summarize(f, rows, truncated))
}

/// `entropy_scan_with_cap` under the default breakpoint budget.
pub fn entropy_scan(f: &PLMap, max_n: u32) -> Result<EntropySequence> {
    entropy_scan_with_cap(f, max_n, DEFAULT_NODE_CAP)
}

fn summarize(f: &PLMap, rows: Vec<EntropyRow>, truncated: bool) -> EntropySequence {
    let h_upper = rows
        .iter()
        .map(|r| r.log_laps_over_n)
        .fold(f64::INFINITY, f64::min);
    let h_point = if let Some(beta) = f.uniform_slope() {
        // Exact for uniformly piecewise linear maps: h = log beta for
        // beta > 1, otherwise 0.
        ln_scalar(&beta).max(0.0)
    } else {
        point_estimate(&rows)
    };
    let h_point = h_point.max(0.0);
    let last_var = rows.last().map(|r| r.log_var_over_n).unwrap_or(0.0);
    EntropySequence {
        h_upper,
        h_point,
        beta: h_point.exp(),
        r: (-h_point).exp(),
        truncated,
        variation_growth: last_var > 1e-6,
        rows,
    }
}

fn point_estimate(rows: &[EntropyRow]) -> f64 {
    let k = rows.len();
    if k < 2 {
        return rows.last().map(|r| r.log_laps_over_n).unwrap_or(0.0);
    }
    let (prev, last) = (&rows[k - 2], &rows[k - 1]);
    if last.laps > prev.laps {
        (last.laps as f64 / prev.laps as f64).ln()
    } else if last.laps == rows[0].laps {
        // no growth anywhere
        0.0
    } else {
        // ratio degenerate (growth stalled on the final step)
        last.log_laps_over_n
    }
}

/// Entropy of a uniformly piecewise linear map with slope `beta`:
/// `log beta` for `beta > 1`, zero otherwise.
pub fn entropy_of_uniform_pl(beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::Domain(format!("slope must be positive, got {beta}")));
    }
    Ok(if beta > 1.0 { beta.ln() } else { 0.0 })
}

/// `(1/n) log Var(f^n)` at a single `n`, exact until the final log.
pub fn variation_rate(f: &PLMap, n: u32) -> Result<f64> {
    let it = f.iterate(n)?;
    Ok(ln_scalar(&it.variation()) / n as f64)
}

/// Growth data for internal consumers that care about ratio accuracy:
/// deepens to 28 iterates or a 200k-breakpoint budget, whichever first.
/// Uniformly piecewise linear maps need no depth at all, their rate being
/// exact.
pub(crate) fn growth_data(f: &PLMap) -> Result<EntropySequence> {
    if f.uniform_slope().is_some() {
        entropy_scan_with_cap(f, 2, 200_000)
    } else {
        entropy_scan_with_cap(f, 28, 200_000)
    }
}
