//! Comparison methods: the max-norm hypercube, per-dimension conformalized
//! quantile regression with a Bonferroni split, and raw Bonferroni quantiles.

use serde::{Deserialize, Serialize};

use crate::data::MultiTargetDataset;
use crate::error::{Error, Result};
use crate::models::{fit_least_squares, Basis, PointModel, QuantileModel};
use crate::quantile::inflated_empirical_quantile;
use crate::region::{expand_side, interval_score, Hyperrectangle, MiscoverageConfig};
use crate::split::SplitPlan;

/// Hypercube of half-width `half_width` around the point prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteMaxPredictor {
    pub model: PointModel,
    #[serde(with = "crate::serde_float")]
    pub half_width: f64,
    pub config: MiscoverageConfig,
}

impl AbsoluteMaxPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<Hyperrectangle> {
        let f = self.model.predict(x)?;
        let (lo, hi) = f.iter().map(|&c| expand_side(c, c, self.half_width)).unzip();
        Hyperrectangle::new(lo, hi)
    }

    /// Nominal side lengths, identical in every dimension.
    pub fn side_lengths(&self) -> Vec<f64> {
        vec![2.0 * self.half_width; self.model.n_targets()]
    }
}

/// Calibrates on `V = max_j |y_j - f_j(x)|` over the union of the calibration folds.
pub fn fit_absolute_max(
    data: &MultiTargetDataset,
    split: &SplitPlan,
    config: &MiscoverageConfig,
    basis: &Basis,
) -> Result<AbsoluteMaxPredictor> {
    config.validate()?;
    split.validate(data.len(), false)?;
    let model = fit_least_squares(&data.subset(&split.train_idx), basis)?;
    let scores = split
        .calibration()
        .iter()
        .map(|&i| {
            let f = model.predict(data.x().row(i))?;
            Ok(f.iter()
                .zip(data.y().row(i))
                .map(|(f, y)| (y - f).abs())
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let half_width = inflated_empirical_quantile(&scores, config.coverage())?;
    Ok(AbsoluteMaxPredictor {
        model,
        half_width,
        config: *config,
    })
}

/// Product of per-dimension conformalized quantile intervals at level
/// `1 - alpha / p` each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonferroniCqrPredictor {
    pub model: QuantileModel,
    #[serde(with = "crate::serde_float::vec")]
    pub adj: Vec<f64>,
    pub config: MiscoverageConfig,
}

impl BonferroniCqrPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<Hyperrectangle> {
        let band = self.model.predict(x)?;
        let (lo, hi) = (0..band.lo.len())
            .map(|j| expand_side(band.lo[j], band.hi[j], self.adj[j]))
            .unzip();
        Hyperrectangle::new(lo, hi)
    }
}

/// Per-dimension quantile levels `(alpha_lo / p, 1 - alpha_hi / p)`.
pub fn bonferroni_levels(config: &MiscoverageConfig, p: usize) -> (f64, f64) {
    let p = p as f64;
    (config.alpha_lo / p, 1.0 - config.alpha_hi / p)
}

pub fn fit_bonferroni_cqr(
    data: &MultiTargetDataset,
    split: &SplitPlan,
    config: &MiscoverageConfig,
    basis: &Basis,
    levels: Option<(f64, f64)>,
) -> Result<BonferroniCqrPredictor> {
    config.validate()?;
    split.validate(data.len(), false)?;
    let p = data.n_targets();
    let (lo_level, hi_level) = levels.unwrap_or_else(|| bonferroni_levels(config, p));
    let model = QuantileModel::fit(&data.subset(&split.train_idx), basis, lo_level, hi_level)?;
    let cal = split.calibration();
    let mut e = vec![Vec::with_capacity(cal.len()); p];
    for &i in &cal {
        let band = model.predict(data.x().row(i))?;
        for j in 0..p {
            e[j].push(interval_score(band.lo[j], band.hi[j], data.y().get(i, j))?);
        }
    }
    let level = 1.0 - config.alpha / p as f64;
    let adj = e
        .iter()
        .map(|scores| inflated_empirical_quantile(scores, level))
        .collect::<Result<Vec<f64>>>()?;
    Ok(BonferroniCqrPredictor {
        model,
        adj,
        config: *config,
    })
}

/// Raw quantile rectangle without any calibration step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBonferroniPredictor {
    pub model: QuantileModel,
    pub config: MiscoverageConfig,
}

impl NaiveBonferroniPredictor {
    pub fn predict(&self, x: &[f64]) -> Result<Hyperrectangle> {
        let band = self.model.predict(x)?;
        Hyperrectangle::new(band.lo, band.hi)
    }
}

/// Fits on the training part only; calibration indices are ignored.
pub fn fit_naive_bonferroni(
    data: &MultiTargetDataset,
    split: &SplitPlan,
    config: &MiscoverageConfig,
    basis: &Basis,
) -> Result<NaiveBonferroniPredictor> {
    config.validate()?;
    if split.train_idx.is_empty() {
        return Err(Error::SplitTooSmall("training part must be non-empty".into()));
    }
    if let Some(&bad) = split.train_idx.iter().find(|&&i| i >= data.len()) {
        return Err(Error::InvalidData(format!("split index {bad} out of range")));
    }
    let (lo, hi) = bonferroni_levels(config, data.n_targets());
    let model = QuantileModel::fit(&data.subset(&split.train_idx), basis, lo, hi)?;
    Ok(NaiveBonferroniPredictor { model, config: *config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chr::{fit_chr, ChrOptions};
    use crate::data::Matrix;
    use crate::models::FeatureMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn problem(seed: u64, p: usize, n: usize) -> MultiTargetDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..2.0)]).collect();
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                (0..p)
                    .map(|j| x[0] * j as f64 + (1.0 + j as f64) * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
                    .collect()
            })
            .collect();
        MultiTargetDataset::new(Matrix::from_rows(&xs).unwrap(), Matrix::from_rows(&ys).unwrap()).unwrap()
    }

    #[test]
    fn absolute_max_reduces_to_split_conformal() {
        let ds = problem(1, 1, 160);
        let cfg = MiscoverageConfig::new(0.1).unwrap();
        let basis = Basis::Shared(FeatureMap::linear(1));
        let split = SplitPlan::contiguous([80, 80, 0]);
        let am = fit_absolute_max(&ds, &split, &cfg, &basis).unwrap();
        let model = fit_least_squares(&ds.subset(&split.train_idx), &basis).unwrap();
        let r: Vec<f64> = (80..160)
            .map(|i| (ds.y().get(i, 0) - model.predict(ds.x().row(i)).unwrap()[0]).abs())
            .collect();
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        // k = ceil(0.9 * 81) = 73
        assert_eq!(am.half_width, sorted[72]);
        // CHR fits the same point model on the same training rows
        let split2 = SplitPlan::contiguous([80, 40, 40]);
        let chr = fit_chr(&ds, &split2, &cfg, &basis, &ChrOptions::default()).unwrap();
        assert_eq!(chr.model, am.model);
    }

    #[test]
    fn absolute_max_sides_equal() {
        let ds = problem(2, 3, 300);
        let am = fit_absolute_max(
            &ds,
            &SplitPlan::contiguous([150, 150, 0]),
            &MiscoverageConfig::new(0.1).unwrap(),
            &Basis::Shared(FeatureMap::linear(1)),
        )
        .unwrap();
        let s = am.side_lengths();
        assert!(s.iter().all(|v| *v == s[0]));
        let rect = am.predict(&[1.3]).unwrap();
        for j in 0..3 {
            assert!((rect.width(j) - s[0]).abs() <= 1e-12 * s[0]);
        }
    }

    #[test]
    fn bonferroni_univariate_is_cqr() {
        let ds = problem(3, 1, 400);
        let cfg = MiscoverageConfig::new(0.2).unwrap();
        let basis = Basis::Shared(FeatureMap::linear(1));
        let split = SplitPlan::contiguous([300, 100, 0]);
        let b = fit_bonferroni_cqr(&ds, &split, &cfg, &basis, None).unwrap();
        assert_eq!((b.model.lo_level, b.model.hi_level), (0.1, 0.9));
        let model = QuantileModel::fit(&ds.subset(&split.train_idx), &basis, 0.1, 0.9).unwrap();
        let mut e: Vec<f64> = (300..400)
            .map(|i| {
                let band = model.predict(ds.x().row(i)).unwrap();
                (band.lo[0] - ds.y().get(i, 0)).max(ds.y().get(i, 0) - band.hi[0])
            })
            .collect();
        e.sort_by(f64::total_cmp);
        // k = ceil(0.8 * 101) = 81
        assert_eq!(b.adj[0], e[80]);
    }

    #[test]
    fn bonferroni_levels_split_alpha() {
        let cfg = MiscoverageConfig::new(0.1).unwrap();
        let (lo, hi) = bonferroni_levels(&cfg, 2);
        assert!((lo - 0.025).abs() < 1e-15 && (hi - 0.975).abs() < 1e-15);
        assert_eq!(bonferroni_levels(&cfg, 1), (0.05, 0.95));
    }

    #[test]
    fn naive_with_oracle_quantiles_covers() {
        // independent N(0,1) targets with the exact quantiles at 0.025 / 0.975
        let z = 1.959963984540054;
        let model = QuantileModel {
            basis: Basis::Shared(FeatureMap::linear(1)),
            lo_coef: vec![vec![-z, 0.0]; 2],
            hi_coef: vec![vec![z, 0.0]; 2],
            lo_level: 0.025,
            hi_level: 0.975,
            n_covariates: 1,
        };
        let pred = NaiveBonferroniPredictor {
            model,
            config: MiscoverageConfig::new(0.1).unwrap(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rect = pred.predict(&[0.0]).unwrap();
        let hits = (0..n)
            .filter(|_| rect.contains(&[normal.sample(&mut rng), normal.sample(&mut rng)]))
            .count();
        let cov = hits as f64 / n as f64;
        // 0.95^2 = 0.9025 >= 0.9
        assert!(cov >= 0.9 && (cov - 0.9025).abs() < 0.004, "{cov}");
    }

    #[test]
    fn naive_uses_train_only() {
        let ds = problem(4, 2, 200);
        let cfg = MiscoverageConfig::new(0.1).unwrap();
        let basis = Basis::Shared(FeatureMap::linear(1));
        let a = fit_naive_bonferroni(&ds, &SplitPlan::contiguous([100, 50, 50]), &cfg, &basis).unwrap();
        let b = fit_naive_bonferroni(&ds, &SplitPlan::contiguous([100, 0, 0]), &cfg, &basis).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.model.lo_level, a.model.hi_level), (0.025, 0.975));
    }

    #[test]
    fn bonferroni_overcovers_relative_to_target() {
        let ds = problem(5, 3, 6000);
        let cfg = MiscoverageConfig::new(0.1).unwrap();
        let basis = Basis::Shared(FeatureMap::linear(1));
        let b = fit_bonferroni_cqr(&ds, &SplitPlan::contiguous([1000, 1000, 0]), &cfg, &basis, None).unwrap();
        let hits = (2000..6000)
            .filter(|&i| b.predict(ds.x().row(i)).unwrap().contains(ds.y().row(i)))
            .count();
        let cov = hits as f64 / 4000.0;
        // independent targets: about (1 - 0.1/3)^3 = 0.903
        assert!(cov > 0.885, "{cov}");
    }
}
