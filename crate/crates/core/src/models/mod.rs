//! Point and quantile regression fitters used to build the initial,
//! unconformalized intervals.

pub mod features;
pub mod least_squares;
pub mod pinball;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::MultiTargetDataset;
use crate::error::{Error, Result};
pub use features::{Basis, FeatureMap, Term};
use least_squares::{design_matrix, solve_least_squares};
use pinball::fit_quantile_design;

fn check_covariates(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite covariate".into()));
    }
    Ok(())
}

/// Per-target least-squares fit `f_j(x) = phi_j(x)' beta_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointModel {
    pub basis: Basis,
    pub coef: Vec<Vec<f64>>,
    pub n_covariates: usize,
}

impl PointModel {
    pub fn n_targets(&self) -> usize {
        self.coef.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_covariates(x, self.n_covariates)?;
        Ok(self
            .coef
            .iter()
            .enumerate()
            .map(|(j, c)| self.basis.map(j).dot(x, c))
            .collect())
    }
}

pub fn fit_least_squares(train: &MultiTargetDataset, basis: &Basis) -> Result<PointModel> {
    basis.validate(train.n_covariates(), train.n_targets())?;
    let coef = (0..train.n_targets())
        .map(|j| {
            let design = design_matrix(basis.map(j), train.x());
            let y = DVector::from_vec(train.y().column(j));
            solve_least_squares(&design, &y).map(|b| b.as_slice().to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PointModel {
        basis: basis.clone(),
        coef,
        n_covariates: train.n_covariates(),
    })
}

pub fn predict_point(model: &PointModel, x: &[f64]) -> Result<Vec<f64>> {
    model.predict(x)
}

/// Per-target linear pinball regression at level `tau`.
pub fn fit_pinball_linear(train: &MultiTargetDataset, basis: &Basis, tau: f64) -> Result<Vec<Vec<f64>>> {
    basis.validate(train.n_covariates(), train.n_targets())?;
    (0..train.n_targets())
        .map(|j| {
            let design = design_matrix(basis.map(j), train.x());
            let y = DVector::from_vec(train.y().column(j));
            fit_quantile_design(&design, &y, tau).map(|b| b.as_slice().to_vec())
        })
        .collect()
}

/// Lower and upper conditional quantile surfaces for every target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub basis: Basis,
    pub lo_coef: Vec<Vec<f64>>,
    pub hi_coef: Vec<Vec<f64>>,
    pub lo_level: f64,
    pub hi_level: f64,
    pub n_covariates: usize,
}

/// Quantile interval per target at one covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Dimensions whose surfaces crossed and were swapped.
    pub crossed: usize,
}

impl QuantileBand {
    pub fn lengths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }
}

impl QuantileModel {
    pub fn fit(train: &MultiTargetDataset, basis: &Basis, lo_level: f64, hi_level: f64) -> Result<Self> {
        if lo_level.is_nan() || hi_level.is_nan() || lo_level >= hi_level {
            return Err(Error::InvalidConfig(format!(
                "lower quantile level {lo_level} must be below upper level {hi_level}"
            )));
        }
        Ok(Self {
            basis: basis.clone(),
            lo_coef: fit_pinball_linear(train, basis, lo_level)?,
            hi_coef: fit_pinball_linear(train, basis, hi_level)?,
            lo_level,
            hi_level,
            n_covariates: train.n_covariates(),
        })
    }

    pub fn n_targets(&self) -> usize {
        self.lo_coef.len()
    }

    /// Both surfaces at `x`; crossed pairs are swapped so `lo <= hi`.
    pub fn predict(&self, x: &[f64]) -> Result<QuantileBand> {
        check_covariates(x, self.n_covariates)?;
        let p = self.n_targets();
        let mut lo = Vec::with_capacity(p);
        let mut hi = Vec::with_capacity(p);
        let mut crossed = 0;
        for j in 0..p {
            let map = self.basis.map(j);
            let a = map.dot(x, &self.lo_coef[j]);
            let b = map.dot(x, &self.hi_coef[j]);
            if a > b {
                crossed += 1;
                lo.push(b);
                hi.push(a);
            } else {
                lo.push(a);
                hi.push(b);
            }
        }
        Ok(QuantileBand { lo, hi, crossed })
    }
}

pub fn predict_quantiles(model: &QuantileModel, x: &[f64]) -> Result<QuantileBand> {
    model.predict(x)
}
