//! Coverage, size and balance metrics, and the Monte-Carlo harness.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MultiTargetDataset;
use crate::error::{Error, Result};
use crate::method::{fit_method, MethodConfig, RegionPredictor};
use crate::models::Basis;
use crate::rng::{replicate_rng, stream_id, Role};
use crate::simgen::ScenarioSpec;
use crate::split::SplitPlan;

/// Test-set summary of one fitted predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_test: usize,
    /// Fraction of test responses inside their whole box.
    pub coverage: f64,
    pub marginal_coverage: Vec<f64>,
    /// Mean side length per dimension.
    #[serde(with = "crate::serde_float::vec")]
    pub mean_lengths: Vec<f64>,
    /// Mean of the per-point product of side lengths.
    #[serde(with = "crate::serde_float")]
    pub mean_volume: f64,
    /// Test points whose box has an infinite side.
    pub unbounded: usize,
    pub balance: f64,
}

/// `max_j |m_j - mean(m)|` over the marginal miscoverages `m_j`.
pub fn balance_statistic(marginal_coverage: &[f64]) -> f64 {
    if marginal_coverage.is_empty() {
        return 0.0;
    }
    let mean = marginal_coverage.iter().sum::<f64>() / marginal_coverage.len() as f64;
    marginal_coverage
        .iter()
        .map(|c| ((1.0 - c) - (1.0 - mean)).abs())
        .fold(0.0, f64::max)
}

pub fn evaluate<P: RegionPredictor + ?Sized>(predictor: &P, test: &MultiTargetDataset) -> Result<EvaluationReport> {
    let p = predictor.n_targets();
    if test.n_targets() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: test.n_targets(),
        });
    }
    let n = test.len();
    if n == 0 {
        return Err(Error::InvalidData("empty test set".into()));
    }
    let mut joint = 0usize;
    let mut marginal = vec![0usize; p];
    let mut lengths = vec![0.0; p];
    let mut volume = 0.0;
    let mut unbounded = 0;
    for (x, y) in test.x().iter_rows().zip(test.y().iter_rows()) {
        let region = predictor.predict(x)?;
        let mut all = true;
        for (j, &yj) in y.iter().enumerate() {
            if region.contains_dim(j, yj) {
                marginal[j] += 1;
            } else {
                all = false;
            }
        }
        joint += all as usize;
        let sides = predictor.side_lengths(x)?;
        for (acc, s) in lengths.iter_mut().zip(&sides) {
            *acc += s;
        }
        let v: f64 = sides.iter().product();
        if v.is_infinite() {
            unbounded += 1;
        }
        volume += v;
    }
    let nf = n as f64;
    let marginal_coverage: Vec<f64> = marginal.iter().map(|&c| c as f64 / nf).collect();
    Ok(EvaluationReport {
        n_test: n,
        coverage: joint as f64 / nf,
        balance: balance_statistic(&marginal_coverage),
        marginal_coverage,
        mean_lengths: lengths.iter().map(|l| l / nf).collect(),
        mean_volume: volume / nf,
        unbounded,
    })
}

/// Mean and standard error over replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "crate::serde_float")]
    pub mean: f64,
    #[serde(with = "crate::serde_float")]
    pub sd: f64,
    #[serde(with = "crate::serde_float")]
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            sd,
            se: sd / n.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicates: usize,
    pub coverage: Summary,
    pub marginal_coverage: Vec<Summary>,
    pub mean_lengths: Vec<Summary>,
    pub mean_volume: Summary,
    pub balance: Summary,
    /// Replicates with at least one unbounded box.
    pub unbounded_replicates: usize,
}

impl Aggregate {
    pub fn of(reports: &[EvaluationReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidData("no replicates to aggregate".into()))?;
        let p = first.marginal_coverage.len();
        let field = |f: &dyn Fn(&EvaluationReport) -> f64| Summary::of(&reports.iter().map(f).collect::<Vec<_>>());
        Ok(Self {
            replicates: reports.len(),
            coverage: field(&|r| r.coverage),
            marginal_coverage: (0..p).map(|j| field(&|r| r.marginal_coverage[j])).collect(),
            mean_lengths: (0..p).map(|j| field(&|r| r.mean_lengths[j])).collect(),
            mean_volume: field(&|r| r.mean_volume),
            balance: field(&|r| r.balance),
            unbounded_replicates: reports.iter().filter(|r| r.unbounded > 0).count(),
        })
    }
}

/// All replicates of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStudy {
    pub config: MethodConfig,
    pub reports: Vec<EvaluationReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub replicates: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

struct Draw {
    fit: MultiTargetDataset,
    split: SplitPlan,
    test: MultiTargetDataset,
}

fn run<F>(methods: &[MethodConfig], basis: &Basis, opts: &RunOptions, draw: F) -> Result<Vec<MethodStudy>>
where
    F: Fn(usize) -> Result<Draw> + Sync,
{
    if opts.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods selected".into()));
    }
    for m in methods {
        m.miscoverage()?;
    }
    let one = |r: usize| -> Result<Vec<EvaluationReport>> {
        let d = draw(r)?;
        methods
            .iter()
            .map(|m| evaluate(&fit_method(m, &d.fit, &d.split, basis)?, &d.test))
            .collect()
    };
    let all = || {
        (0..opts.replicates)
            .into_par_iter()
            .map(|r| {
                one(r).map_err(|e| Error::Replicate {
                    replicate: r,
                    seed: opts.seed,
                    stream: stream_id(r, Role::Fit),
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let per_replicate = if opts.jobs == 0 {
        all()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(all)?
    };
    methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let reports: Vec<EvaluationReport> = per_replicate.iter().map(|r| r[k].clone()).collect();
            Ok(MethodStudy {
                config: *m,
                aggregate: Aggregate::of(&reports)?,
                reports,
            })
        })
        .collect()
}

/// Fits every method on the same fresh draw of `spec` in each replicate.
pub fn run_replicated(spec: &ScenarioSpec, methods: &[MethodConfig], opts: &RunOptions) -> Result<Vec<MethodStudy>> {
    spec.validate()?;
    run(methods, &spec.basis, opts, |r| {
        let rep = spec.replicate(opts.seed, r, opts.n_test)?;
        Ok(Draw {
            fit: rep.fit,
            split: rep.split,
            test: rep.test,
        })
    })
}

/// Repeatedly shuffles a fixed dataset into train / cal1 / cal2 parts of the
/// given sizes and tests on the remaining rows. `opts.n_test` is ignored.
pub fn run_permutations(
    data: &MultiTargetDataset,
    basis: &Basis,
    sizes: [usize; 3],
    methods: &[MethodConfig],
    opts: &RunOptions,
) -> Result<Vec<MethodStudy>> {
    basis.validate(data.n_covariates(), data.n_targets())?;
    let used: usize = sizes.iter().sum();
    if used >= data.len() {
        return Err(Error::SplitTooSmall(format!(
            "{} rows leave no test rows after {used} fit rows",
            data.len()
        )));
    }
    let [a, b, c] = sizes;
    run(methods, basis, opts, |r| {
        let mut perm: Vec<usize> = (0..data.len()).collect();
        perm.shuffle(&mut replicate_rng(opts.seed, r, Role::Shuffle));
        Ok(Draw {
            fit: data.subset(&perm[..used]),
            split: SplitPlan::contiguous([a, b, c]),
            test: data.subset(&perm[used..]),
        })
    })
}
