//! Seeded synthetic multi-target regression scenarios.
//!
//! A response is built as
//!
//! ```text
//! y_j = mean_j(x) + shift_j(x) + scale_j * scale_term_j(x) * e_j
//! ```
//!
//! where `(e_1, ..., e_p)` is a row of independent base errors multiplied by
//! the upper Cholesky factor of the correlation matrix. Base errors whose
//! parameters depend on `x` (e.g. a gamma shape proportional to `|x2|`) are
//! drawn per row before mixing; `shift` and `scale` act after mixing.

pub mod builtin;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, MultiTargetDataset};
use crate::error::{Error, Result};
use crate::models::{Basis, Term};
use crate::rng::{replicate_rng, Role, SimRng};
use crate::split::SplitPlan;

pub use builtin::{builtin, BUILTIN_NAMES};

/// Gamma shapes below this are raised to it.
pub const MIN_GAMMA_SHAPE: f64 = 1e-6;

/// Marginal law of one covariate. Covariate references are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CovariateLaw {
    Exponential {
        rate: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    /// Uniform between two earlier covariates of the same row.
    UniformBetween {
        lower: usize,
        upper: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub coef: f64,
    pub term: Term,
}

/// `sum coef_k * term_k(x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expr(pub Vec<WeightedTerm>);

impl Expr {
    pub fn parse(parts: &[(f64, &str)]) -> Result<Self> {
        parts
            .iter()
            .map(|(coef, t)| {
                Ok(WeightedTerm {
                    coef: *coef,
                    term: t.parse()?,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Expr)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|w| w.coef * w.term.eval(x)).sum()
    }

    fn max_var(&self) -> Option<usize> {
        self.0.iter().filter_map(|w| w.term.max_var()).max()
    }
}

/// Independent base error before mixing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorLaw {
    Normal {
        #[serde(default)]
        mean: f64,
        sd: f64,
    },
    /// Shape-rate gamma; the shape is `shape * shape_term(x)` when a term is given.
    Gamma {
        shape: f64,
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape_term: Option<Term>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub mean: Expr,
    pub error: ErrorLaw,
    #[serde(default)]
    pub shift: Expr,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_term: Option<Term>,
}

impl TargetSpec {
    pub fn new(mean: Expr, error: ErrorLaw) -> Self {
        Self {
            mean,
            error,
            shift: Expr::default(),
            scale: 1.0,
            scale_term: None,
        }
    }
}

/// Rows drawn per replicate: the fit pool is split contiguously into
/// train / cal1 / cal2, and `test` rows are drawn from a separate stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub train: usize,
    pub cal1: usize,
    pub cal2: usize,
    pub test: usize,
}

impl Sizes {
    pub fn fit_rows(&self) -> usize {
        self.train + self.cal1 + self.cal2
    }

    pub fn split(&self) -> SplitPlan {
        SplitPlan::contiguous([self.train, self.cal1, self.cal2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub covariates: Vec<CovariateLaw>,
    pub targets: Vec<TargetSpec>,
    /// `p x p` correlation of the base errors.
    pub correlation: Vec<Vec<f64>>,
    /// Model basis used by the fitters on this scenario.
    pub basis: Basis,
    pub sizes: Sizes,
    pub seed: u64,
}

/// Freshly drawn replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub fit: MultiTargetDataset,
    pub split: SplitPlan,
    pub test: MultiTargetDataset,
}

impl ScenarioSpec {
    pub fn d(&self) -> usize {
        self.covariates.len()
    }

    pub fn p(&self) -> usize {
        self.targets.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.covariates.is_empty() || self.targets.is_empty() {
            return bad("need at least one covariate and one target".into());
        }
        for (i, law) in self.covariates.iter().enumerate() {
            match *law {
                CovariateLaw::Exponential { rate } if !(rate > 0.0 && rate.is_finite()) => {
                    return bad(format!("x{}: exponential rate must be positive", i + 1))
                }
                CovariateLaw::Uniform { min, max } if !(min < max && min.is_finite() && max.is_finite()) => {
                    return bad(format!("x{}: uniform needs min < max", i + 1))
                }
                CovariateLaw::UniformBetween { lower, upper }
                    if lower == 0 || upper == 0 || lower > i || upper > i || lower == upper =>
                {
                    return bad(format!("x{}: bounds must name two distinct earlier covariates", i + 1))
                }
                _ => {}
            }
        }
        let d = self.d();
        for (j, t) in self.targets.iter().enumerate() {
            let vars = [
                t.mean.max_var(),
                t.shift.max_var(),
                t.scale_term.as_ref().and_then(Term::max_var),
                match &t.error {
                    ErrorLaw::Gamma { shape_term, .. } => shape_term.as_ref().and_then(Term::max_var),
                    ErrorLaw::Normal { .. } => None,
                },
            ];
            if vars.iter().flatten().any(|&v| v >= d) {
                return bad(format!("target {}: references a covariate beyond x{d}", j + 1));
            }
            match t.error {
                ErrorLaw::Normal { mean, sd } if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) => {
                    return bad(format!("target {}: normal sd must be positive", j + 1))
                }
                ErrorLaw::Gamma { shape, rate, .. }
                    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) =>
                {
                    return bad(format!("target {}: gamma shape and rate must be positive", j + 1))
                }
                _ => {}
            }
            if !(t.scale.is_finite() && t.scale > 0.0) {
                return bad(format!("target {}: scale must be positive", j + 1));
            }
        }
        let p = self.p();
        if self.correlation.len() != p || self.correlation.iter().any(|r| r.len() != p) {
            return bad(format!("correlation must be {p} x {p}"));
        }
        for a in 0..p {
            if self.correlation[a][a] != 1.0 {
                return bad("correlation must have a unit diagonal".into());
            }
            for b in 0..p {
                if self.correlation[a][b] != self.correlation[b][a] {
                    return bad("correlation must be symmetric".into());
                }
            }
        }
        upper_cholesky(&self.correlation)?;
        self.basis
            .validate(d, p)
            .map_err(|e| Error::InvalidSpec(format!("basis: {e}")))?;
        if self.sizes.train == 0 || self.sizes.cal1 == 0 {
            return bad("train and cal1 sizes must be positive".into());
        }
        Ok(())
    }

    /// `n` i.i.d. rows.
    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<MultiTargetDataset> {
        let (d, p) = (self.d(), self.p());
        let mut x = Matrix::zeros(n, d);
        for i in 0..n {
            let row = x.row_mut(i);
            for (k, law) in self.covariates.iter().enumerate() {
                row[k] = match *law {
                    CovariateLaw::Exponential { rate } => Exp::new(rate)
                        .map_err(|e| Error::InvalidSpec(e.to_string()))?
                        .sample(rng),
                    CovariateLaw::Uniform { min, max } => rng.random_range(min..max),
                    CovariateLaw::UniformBetween { lower, upper } => {
                        let (a, b) = (row[lower - 1], row[upper - 1]);
                        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                        if lo == hi {
                            lo
                        } else {
                            Uniform::new(lo, hi)
                                .map_err(|e| Error::InvalidSpec(e.to_string()))?
                                .sample(rng)
                        }
                    }
                };
            }
        }
        let mut eps = Matrix::zeros(n, p);
        for i in 0..n {
            for (j, t) in self.targets.iter().enumerate() {
                let v = match &t.error {
                    ErrorLaw::Normal { mean, sd } => {
                        let z: f64 = StandardNormal.sample(rng);
                        mean + sd * z
                    }
                    ErrorLaw::Gamma {
                        shape,
                        rate,
                        shape_term,
                    } => {
                        let k = shape * shape_term.as_ref().map_or(1.0, |t| t.eval(x.row(i)));
                        Gamma::new(k.max(MIN_GAMMA_SHAPE), 1.0 / rate)
                            .map_err(|e| Error::InvalidSpec(e.to_string()))?
                            .sample(rng)
                    }
                };
                eps.set(i, j, v);
            }
        }
        let mixed = correlate_errors(&eps, &self.correlation)?;
        let mut y = Matrix::zeros(n, p);
        for i in 0..n {
            let xi = x.row(i);
            for (j, t) in self.targets.iter().enumerate() {
                let s = t.scale * t.scale_term.as_ref().map_or(1.0, |term| term.eval(xi));
                y.set(i, j, t.mean.eval(xi) + t.shift.eval(xi) + s * mixed.get(i, j));
            }
        }
        MultiTargetDataset::new(x, y)
    }

    /// Replicate `r` under master seed `seed`: the fit pool and the test rows
    /// come from independent streams.
    pub fn replicate(&self, seed: u64, r: usize, n_test: usize) -> Result<Replicate> {
        let fit = self.sample(self.sizes.fit_rows(), &mut replicate_rng(seed, r, Role::Fit))?;
        let test = self.sample(n_test, &mut replicate_rng(seed, r, Role::Test))?;
        Ok(Replicate {
            fit,
            split: self.sizes.split(),
            test,
        })
    }
}

/// Validates `spec` and draws replicate 0 with its own seed and test size.
pub fn generate(spec: &ScenarioSpec) -> Result<Replicate> {
    spec.validate()?;
    spec.replicate(spec.seed, 0, spec.sizes.test)
}

/// Upper-triangular `U` with `U' U = r`.
pub fn upper_cholesky(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = r.len();
    let m = DMatrix::from_fn(p, p, |a, b| r[a][b]);
    let chol = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.l().transpose())
}

/// `eps * U` row by row, with `U` the upper Cholesky factor of `r`.
pub fn correlate_errors(eps: &Matrix, r: &[Vec<f64>]) -> Result<Matrix> {
    let p = eps.cols();
    if r.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: r.len(),
        });
    }
    let u = upper_cholesky(r)?;
    let mut out = Matrix::zeros(eps.rows(), p);
    for i in 0..eps.rows() {
        let row = eps.row(i);
        let dst = out.row_mut(i);
        for j in 0..p {
            dst[j] = (0..=j).map(|k| row[k] * u[(k, j)]).sum();
        }
    }
    Ok(out)
}
