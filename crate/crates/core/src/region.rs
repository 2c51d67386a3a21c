//! Prediction hyperrectangles and the miscoverage configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_j, hi_j]` per response dimension. Bounds may be
/// infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperrectangle {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Hyperrectangle {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidData("hyperrectangle needs p >= 1".into()));
        }
        for (&l, &h) in lo.iter().zip(&hi) {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::InvertedInterval { lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    /// The whole space in `p` dimensions.
    pub fn unbounded(p: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; p],
            hi: vec![f64::INFINITY; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.width(j)).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn contains_dim(&self, j: usize, y: f64) -> bool {
        self.lo[j] <= y && y <= self.hi[j]
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim() && (0..self.dim()).all(|j| self.contains_dim(j, y[j]))
    }
}

/// Overall miscoverage `alpha` and its split into lower/upper tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiscoverageConfig {
    pub alpha: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl MiscoverageConfig {
    /// Equal tails `alpha / 2` each.
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_tails(alpha, alpha / 2.0, alpha / 2.0)
    }

    pub fn with_tails(alpha: f64, alpha_lo: f64, alpha_hi: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            alpha_lo,
            alpha_hi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidLevel(self.alpha));
        }
        if !(self.alpha_lo >= 0.0 && self.alpha_hi >= 0.0) {
            return Err(Error::InvalidConfig("tail miscoverages must be >= 0".into()));
        }
        if (self.alpha_lo + self.alpha_hi - self.alpha).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "tails {} + {} do not sum to alpha {}",
                self.alpha_lo, self.alpha_hi, self.alpha
            )));
        }
        Ok(())
    }

    /// Target coverage `1 - alpha`.
    pub fn coverage(&self) -> f64 {
        1.0 - self.alpha
    }
}

/// Expands `[q_lo, q_hi]` by `adj` on both ends. Non-zero adjustments round
/// the bounds outward by a few ulps of the operands so that a response whose
/// score equals the adjustment is never excluded by rounding. A side that
/// would invert (a negative adjustment larger than half the width) collapses
/// to its midpoint.
pub(crate) fn expand_side(q_lo: f64, q_hi: f64, adj: f64) -> (f64, f64) {
    if adj == 0.0 {
        return (q_lo, q_hi);
    }
    if adj == f64::INFINITY {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    const ULPS: f64 = 16.0 * f64::EPSILON;
    let lo = (q_lo - adj) - ULPS * (q_lo.abs() + adj.abs());
    let hi = (q_hi + adj) + ULPS * (q_hi.abs() + adj.abs());
    if lo > hi {
        let mid = 0.5 * (q_lo + q_hi);
        (mid, mid)
    } else {
        (lo, hi)
    }
}

/// `max(lo - y, y - hi)`: negative iff `y` lies strictly inside.
pub fn interval_score(lo: f64, hi: f64, y: f64) -> Result<f64> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvertedInterval { lo, hi });
    }
    Ok((lo - y).max(y - hi))
}
