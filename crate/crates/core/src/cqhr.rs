//! Hyperrectangles from per-target quantile regression.
//!
//! Side lengths come from the fitted quantile surfaces and therefore change
//! with `x`. Each calibration score is converted into reference units using
//! the lengths at that calibration point, and the single calibrated
//! adjustment is converted back with the lengths at the query point.

use serde::{Deserialize, Serialize};

use crate::chr::MIN_SIDE;
use crate::data::{Matrix, MultiTargetDataset};
use crate::error::{Error, Result};
use crate::models::{Basis, QuantileBand, QuantileModel};
use crate::quantile::inflated_empirical_quantile;
use crate::region::{expand_side, interval_score, Hyperrectangle, MiscoverageConfig};
use crate::split::SplitPlan;

/// `e * len_ref / len_j`.
pub fn convert_to_reference(e: f64, len_ref: f64, len_j: f64) -> Result<f64> {
    if len_ref.is_nan() || len_ref <= 0.0 {
        return Err(Error::DegenerateSide(len_ref));
    }
    if len_j.is_nan() || len_j <= 0.0 {
        return Err(Error::DegenerateSide(len_j));
    }
    Ok(e * (len_ref / len_j))
}

/// Which dimension the scores are measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceDim {
    Index(usize),
    /// Dimension whose calibration side lengths have the smallest
    /// coefficient of variation.
    MinVariability,
}

impl Default for ReferenceDim {
    fn default() -> Self {
        ReferenceDim::Index(0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CqhrOptions {
    /// Quantile levels of the initial surfaces; the miscoverage tails
    /// `(alpha_lo, 1 - alpha_hi)` when unset.
    pub levels: Option<(f64, f64)>,
    pub reference: ReferenceDim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqhrPredictor {
    pub model: QuantileModel,
    pub reference_dim: usize,
    #[serde(with = "crate::serde_float")]
    pub adj_ref: f64,
    pub config: MiscoverageConfig,
    /// Crossed quantile pairs repaired on the calibration set.
    pub crossings: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Calibration quantities (`n_cal x p` each, plus the row maxima).
#[derive(Debug, Clone, PartialEq)]
pub struct CqhrScores {
    pub lengths: Matrix,
    pub e: Matrix,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqhrPrediction {
    pub region: Hyperrectangle,
    pub adj: Vec<f64>,
    /// Dimensions whose side length was floored at this point.
    pub floored: Vec<usize>,
    pub crossed: usize,
}

fn floored_lengths(band: &QuantileBand) -> (Vec<f64>, Vec<usize>) {
    let mut floored = Vec::new();
    let lengths = band
        .lengths()
        .into_iter()
        .enumerate()
        .map(|(j, len)| {
            if len <= MIN_SIDE {
                floored.push(j);
                MIN_SIDE
            } else {
                len
            }
        })
        .collect();
    (lengths, floored)
}

fn w_from_band(
    band: &QuantileBand,
    lengths: &[f64],
    reference_dim: usize,
    y: &[f64],
    e_out: &mut [f64],
) -> Result<f64> {
    let mut w = f64::NEG_INFINITY;
    for j in 0..lengths.len() {
        e_out[j] = interval_score(band.lo[j], band.hi[j], y[j])?;
        w = w.max(convert_to_reference(e_out[j], lengths[reference_dim], lengths[j])?);
    }
    Ok(w)
}

impl CqhrPredictor {
    pub fn n_targets(&self) -> usize {
        self.model.n_targets()
    }

    /// Reference-converted maximum score of `(x, y)`.
    pub fn w_score(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if y.len() != self.n_targets() {
            return Err(Error::DimensionMismatch {
                expected: self.n_targets(),
                got: y.len(),
            });
        }
        let band = self.model.predict(x)?;
        let (lengths, _) = floored_lengths(&band);
        let mut e = vec![0.0; lengths.len()];
        w_from_band(&band, &lengths, self.reference_dim, y, &mut e)
    }

    pub fn predict_detailed(&self, x: &[f64]) -> Result<CqhrPrediction> {
        let band = self.model.predict(x)?;
        let (lengths, floored) = floored_lengths(&band);
        let r = self.reference_dim;
        let adj: Vec<f64> = (0..lengths.len())
            .map(|j| {
                if j == r || self.adj_ref.is_infinite() {
                    self.adj_ref
                } else {
                    self.adj_ref * lengths[j] / lengths[r]
                }
            })
            .collect();
        let (lo, hi): (Vec<f64>, Vec<f64>) = (0..lengths.len())
            .map(|j| expand_side(band.lo[j], band.hi[j], adj[j]))
            .unzip();
        Ok(CqhrPrediction {
            region: Hyperrectangle::new(lo, hi)?,
            adj,
            floored,
            crossed: band.crossed,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Hyperrectangle> {
        self.predict_detailed(x).map(|p| p.region)
    }
}

pub fn predict_cqhr(predictor: &CqhrPredictor, x: &[f64]) -> Result<Hyperrectangle> {
    predictor.predict(x)
}

pub fn fit_cqhr(
    data: &MultiTargetDataset,
    split: &SplitPlan,
    config: &MiscoverageConfig,
    basis: &Basis,
    options: &CqhrOptions,
) -> Result<CqhrPredictor> {
    fit_cqhr_with_scores(data, split, config, basis, options).map(|(p, _)| p)
}

/// Default initial levels `(alpha_lo, 1 - alpha_hi)`.
pub fn default_levels(config: &MiscoverageConfig) -> (f64, f64) {
    (config.alpha_lo, 1.0 - config.alpha_hi)
}

fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub fn fit_cqhr_with_scores(
    data: &MultiTargetDataset,
    split: &SplitPlan,
    config: &MiscoverageConfig,
    basis: &Basis,
    options: &CqhrOptions,
) -> Result<(CqhrPredictor, CqhrScores)> {
    config.validate()?;
    split.validate(data.len(), false)?;
    let p = data.n_targets();
    let (lo_level, hi_level) = options.levels.unwrap_or_else(|| default_levels(config));
    let model = QuantileModel::fit(&data.subset(&split.train_idx), basis, lo_level, hi_level)?;
    let cal = split.calibration();
    let mut warnings = Vec::new();

    let mut bands = Vec::with_capacity(cal.len());
    let mut lengths = Matrix::zeros(cal.len(), p);
    let mut crossings = 0;
    let mut n_floored = 0;
    for (k, &i) in cal.iter().enumerate() {
        let band = model.predict(data.x().row(i))?;
        crossings += band.crossed;
        let (len, floored) = floored_lengths(&band);
        n_floored += floored.len();
        lengths.row_mut(k).copy_from_slice(&len);
        bands.push(band);
    }
    if crossings > 0 {
        warnings.push(format!(
            "{crossings} crossed quantile pairs repaired on the calibration set"
        ));
    }
    if n_floored > 0 {
        warnings.push(format!("{n_floored} calibration side lengths floored at {MIN_SIDE:e}"));
    }

    let reference_dim = match options.reference {
        ReferenceDim::Index(r) if r < p => r,
        ReferenceDim::Index(r) => {
            return Err(Error::InvalidConfig(format!(
                "reference dimension {r} out of range for {p} targets"
            )))
        }
        ReferenceDim::MinVariability => (0..p)
            .map(|j| (j, coefficient_of_variation(&lengths.column(j))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .unwrap_or(0),
    };

    let mut e = Matrix::zeros(cal.len(), p);
    let mut w = Vec::with_capacity(cal.len());
    for (k, &i) in cal.iter().enumerate() {
        w.push(w_from_band(
            &bands[k],
            lengths.row(k),
            reference_dim,
            data.y().row(i),
            e.row_mut(k),
        )?);
    }
    let adj_ref = inflated_empirical_quantile(&w, config.coverage())?;
    if adj_ref.is_infinite() {
        warnings.push("calibration too small for the requested level: region is unbounded".into());
    }

    let predictor = CqhrPredictor {
        model,
        reference_dim,
        adj_ref,
        config: *config,
        crossings,
        warnings,
    };
    Ok((predictor, CqhrScores { lengths, e, w }))
}
