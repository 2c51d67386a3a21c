//! The finite-sample-inflated empirical quantile used by every conformal step.
//!
//! For `n` scores and level `delta`, the quantile is the `k`-th smallest score
//! with `k = ceil(delta * (n + 1))`. When `k > n` there is no finite score that
//! carries the guarantee and `+inf` is returned, so the corresponding region
//! side becomes unbounded.

use crate::error::{Error, Result};

/// Relative slack used when taking the ceiling of `delta * (n + 1)`, so that
/// products which are integers in exact arithmetic (e.g. `0.7 * 10`) are not
/// pushed up a rank by rounding.
const RANK_SNAP: f64 = 1e-12;

/// Returns the 1-based order-statistic rank `ceil(delta * (n + 1))`.
///
/// The result may exceed `n`.
pub fn conformal_rank(n: usize, delta: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::EmptyScores);
    }
    check_level(delta)?;
    let target = delta * (n as f64 + 1.0);
    let k = (target - target * RANK_SNAP).ceil();
    Ok((k as usize).max(1))
}

pub(crate) fn check_level(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidLevel(delta))
    }
}

/// The `ceil(delta * (n + 1))`-th smallest of `values`, or `+inf` when that
/// rank exceeds `n`.
///
/// Ties occupy consecutive ranks; there is no randomized tie-breaking.
pub fn inflated_empirical_quantile(values: &[f64], delta: f64) -> Result<f64> {
    let k = conformal_rank(values.len(), delta)?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidData("NaN score".into()));
    }
    if k > values.len() {
        return Ok(f64::INFINITY);
    }
    let mut scratch = values.to_vec();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}
