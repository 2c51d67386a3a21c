//! Method selection and the common predictor interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    fit_absolute_max, fit_bonferroni_cqr, fit_naive_bonferroni, AbsoluteMaxPredictor, BonferroniCqrPredictor,
    NaiveBonferroniPredictor,
};
use crate::chr::{fit_chr, ChrOptions, ChrPredictor, ScoreKind};
use crate::cqhr::{fit_cqhr, CqhrOptions, CqhrPredictor, ReferenceDim};
use crate::data::MultiTargetDataset;
use crate::error::{Error, Result};
use crate::models::Basis;
use crate::region::{Hyperrectangle, MiscoverageConfig};
use crate::split::SplitPlan;

/// Anything that maps a covariate vector to a box.
pub trait RegionPredictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Result<Hyperrectangle>;

    fn n_targets(&self) -> usize;

    /// Side lengths reported for `x`; the box widths unless the method has
    /// a nominal width.
    fn side_lengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict(x).map(|r| r.widths())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ChrAbs,
    ChrSigned,
    Cqhr,
    Absmax,
    BonfCqr,
    BonfNaive,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ChrAbs,
        Method::ChrSigned,
        Method::Cqhr,
        Method::Absmax,
        Method::BonfCqr,
        Method::BonfNaive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ChrAbs => "chr-abs",
            Method::ChrSigned => "chr-signed",
            Method::Cqhr => "cqhr",
            Method::Absmax => "absmax",
            Method::BonfCqr => "bonf-cqr",
            Method::BonfNaive => "bonf-naive",
        }
    }

    /// Whether the method needs two separate calibration folds.
    pub fn needs_two_folds(self) -> bool {
        matches!(self, Method::ChrAbs | Method::ChrSigned)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidConfig(format!("unknown method {s:?} (expected one of {})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    pub alpha: f64,
    #[serde(default)]
    pub reference: ReferenceDim,
    /// First-fold coverage for the CHR methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_coverage: Option<f64>,
}

impl MethodConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        Self {
            method,
            alpha,
            reference: ReferenceDim::default(),
            initial_coverage: None,
        }
    }

    pub fn miscoverage(&self) -> Result<MiscoverageConfig> {
        MiscoverageConfig::new(self.alpha)
    }
}

/// A fitted predictor of any method, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedPredictor {
    Chr(ChrPredictor),
    Cqhr(CqhrPredictor),
    AbsoluteMax(AbsoluteMaxPredictor),
    BonferroniCqr(BonferroniCqrPredictor),
    NaiveBonferroni(NaiveBonferroniPredictor),
}

impl FittedPredictor {
    pub fn warnings(&self) -> &[String] {
        match self {
            FittedPredictor::Chr(p) => &p.warnings,
            FittedPredictor::Cqhr(p) => &p.warnings,
            _ => &[],
        }
    }

    pub fn n_covariates(&self) -> usize {
        match self {
            FittedPredictor::Chr(p) => p.model.n_covariates,
            FittedPredictor::Cqhr(p) => p.model.n_covariates,
            FittedPredictor::AbsoluteMax(p) => p.model.n_covariates,
            FittedPredictor::BonferroniCqr(p) => p.model.n_covariates,
            FittedPredictor::NaiveBonferroni(p) => p.model.n_covariates,
        }
    }
}

impl RegionPredictor for FittedPredictor {
    fn predict(&self, x: &[f64]) -> Result<Hyperrectangle> {
        match self {
            FittedPredictor::Chr(p) => p.predict(x),
            FittedPredictor::Cqhr(p) => p.predict(x),
            FittedPredictor::AbsoluteMax(p) => p.predict(x),
            FittedPredictor::BonferroniCqr(p) => p.predict(x),
            FittedPredictor::NaiveBonferroni(p) => p.predict(x),
        }
    }

    fn n_targets(&self) -> usize {
        match self {
            FittedPredictor::Chr(p) => p.n_targets(),
            FittedPredictor::Cqhr(p) => p.n_targets(),
            FittedPredictor::AbsoluteMax(p) => p.model.n_targets(),
            FittedPredictor::BonferroniCqr(p) => p.model.n_targets(),
            FittedPredictor::NaiveBonferroni(p) => p.model.n_targets(),
        }
    }

    fn side_lengths(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedPredictor::AbsoluteMax(p) => {
                p.model.predict(x)?;
                Ok(p.side_lengths())
            }
            other => other.predict(x).map(|r| r.widths()),
        }
    }
}

/// Fits `cfg.method`. The CHR methods use both calibration folds separately;
/// the others use their union.
pub fn fit_method(
    cfg: &MethodConfig,
    data: &MultiTargetDataset,
    split: &SplitPlan,
    basis: &Basis,
) -> Result<FittedPredictor> {
    let mc = cfg.miscoverage()?;
    let reference_index = |r: ReferenceDim| match r {
        ReferenceDim::Index(i) => i,
        ReferenceDim::MinVariability => 0,
    };
    Ok(match cfg.method {
        Method::ChrAbs | Method::ChrSigned => {
            let options = ChrOptions {
                score_kind: if cfg.method == Method::ChrAbs {
                    ScoreKind::Absolute
                } else {
                    ScoreKind::Signed
                },
                // constant widths make every reference equivalent
                reference_dim: reference_index(cfg.reference),
                initial_coverage: cfg.initial_coverage,
            };
            FittedPredictor::Chr(fit_chr(data, split, &mc, basis, &options)?)
        }
        Method::Cqhr => {
            let options = CqhrOptions {
                levels: None,
                reference: cfg.reference,
            };
            FittedPredictor::Cqhr(fit_cqhr(data, split, &mc, basis, &options)?)
        }
        Method::Absmax => FittedPredictor::AbsoluteMax(fit_absolute_max(data, split, &mc, basis)?),
        Method::BonfCqr => FittedPredictor::BonferroniCqr(fit_bonferroni_cqr(data, split, &mc, basis, None)?),
        Method::BonfNaive => FittedPredictor::NaiveBonferroni(fit_naive_bonferroni(data, split, &mc, basis)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("chr".parse::<Method>().is_err());
    }
}
