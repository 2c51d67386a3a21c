//! Covariate feature maps.
//!
//! A [`FeatureMap`] is a list of product terms over the covariates, written in
//! a small text form so model and scenario files stay readable:
//! `1` (intercept), `x1`, `x2^2`, `x1*x2`, `abs(x2)`, `sqrt_abs(x1)`.
//! Covariate names are 1-based.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Pow { var: usize, exp: u32 },
    Abs { var: usize },
    SqrtAbs { var: usize },
}

impl Factor {
    fn var(&self) -> usize {
        match *self {
            Factor::Pow { var, .. } | Factor::Abs { var } | Factor::SqrtAbs { var } => var,
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Factor::Pow { var, exp } => x[var].powi(exp as i32),
            Factor::Abs { var } => x[var].abs(),
            Factor::SqrtAbs { var } => x[var].abs().sqrt(),
        }
    }
}

/// Product of factors; the empty product is the intercept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term(Vec<Factor>);

impl Term {
    pub fn intercept() -> Self {
        Term(Vec::new())
    }

    pub fn var(var: usize) -> Self {
        Term(vec![Factor::Pow { var, exp: 1 }])
    }

    pub fn is_intercept(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest 0-based covariate index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.0.iter().map(Factor::var).max()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|f| f.eval(x)).product()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, factor) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            match *factor {
                Factor::Pow { var, exp: 1 } => write!(f, "x{}", var + 1)?,
                Factor::Pow { var, exp } => write!(f, "x{}^{}", var + 1, exp)?,
                Factor::Abs { var } => write!(f, "abs(x{})", var + 1)?,
                Factor::SqrtAbs { var } => write!(f, "sqrt_abs(x{})", var + 1)?,
            }
        }
        Ok(())
    }
}

fn parse_var(s: &str) -> Result<usize> {
    let bad = || Error::InvalidConfig(format!("bad covariate name {s:?} (expected x1, x2, ...)"));
    let digits = s.strip_prefix('x').ok_or_else(bad)?;
    let k: usize = digits.parse().map_err(|_| bad())?;
    if k == 0 {
        return Err(bad());
    }
    Ok(k - 1)
}

fn parse_factor(s: &str) -> Result<Factor> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("sqrt_abs(").and_then(|r| r.strip_suffix(')')) {
        return Ok(Factor::SqrtAbs {
            var: parse_var(inner.trim())?,
        });
    }
    if let Some(inner) = s.strip_prefix("abs(").and_then(|r| r.strip_suffix(')')) {
        return Ok(Factor::Abs {
            var: parse_var(inner.trim())?,
        });
    }
    match s.split_once('^') {
        Some((base, exp)) => {
            let exp: u32 = exp
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad exponent in {s:?}")))?;
            if exp == 0 {
                return Err(Error::InvalidConfig(format!("zero exponent in {s:?}")));
            }
            Ok(Factor::Pow {
                var: parse_var(base.trim())?,
                exp,
            })
        }
        None => Ok(Factor::Pow {
            var: parse_var(s)?,
            exp: 1,
        }),
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::intercept());
        }
        s.split('*').map(parse_factor).collect::<Result<_>>().map(Term)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Named covariate expansion whose first term is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFeatureMap")]
pub struct FeatureMap {
    name: String,
    terms: Vec<Term>,
}

#[derive(Deserialize)]
struct RawFeatureMap {
    name: String,
    terms: Vec<Term>,
}

impl TryFrom<RawFeatureMap> for FeatureMap {
    type Error = Error;

    fn try_from(raw: RawFeatureMap) -> Result<Self> {
        FeatureMap::new(raw.name, raw.terms)
    }
}

impl FeatureMap {
    pub fn new(name: impl Into<String>, terms: Vec<Term>) -> Result<Self> {
        match terms.first() {
            Some(t) if t.is_intercept() => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "feature map must start with the intercept term \"1\"".into(),
                ))
            }
        }
        if terms.iter().skip(1).any(Term::is_intercept) {
            return Err(Error::InvalidConfig("repeated intercept term".into()));
        }
        Ok(Self {
            name: name.into(),
            terms,
        })
    }

    /// Parses terms from their text form.
    pub fn parse(name: impl Into<String>, terms: &[&str]) -> Result<Self> {
        let terms = terms.iter().map(|t| t.parse()).collect::<Result<Vec<Term>>>()?;
        Self::new(name, terms)
    }

    /// `(1, x1, ..., xd)`.
    pub fn linear(d: usize) -> Self {
        let mut terms = vec![Term::intercept()];
        terms.extend((0..d).map(Term::var));
        Self {
            name: "linear".into(),
            terms,
        }
    }

    /// Intercept, linear terms, squares and pairwise products.
    pub fn quadratic(d: usize) -> Self {
        let mut terms = vec![Term::intercept()];
        terms.extend((0..d).map(Term::var));
        for a in 0..d {
            for b in a..d {
                let t = if a == b {
                    Term(vec![Factor::Pow { var: a, exp: 2 }])
                } else {
                    Term(vec![Factor::Pow { var: a, exp: 1 }, Factor::Pow { var: b, exp: 1 }])
                };
                terms.push(t);
            }
        }
        Self {
            name: "quadratic".into(),
            terms,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Output length `m`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of covariates the map reads (one past the largest index).
    pub fn required_covariates(&self) -> usize {
        self.terms.iter().filter_map(Term::max_var).max().map_or(0, |v| v + 1)
    }

    pub fn expand_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.terms.iter().map(|t| t.eval(x)));
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.eval(x)).collect()
    }

    /// Inner product of the expanded features with `coef`.
    #[inline]
    pub fn dot(&self, x: &[f64], coef: &[f64]) -> f64 {
        self.terms.iter().zip(coef).map(|(t, c)| c * t.eval(x)).sum()
    }
}

/// One feature map shared by all targets, or one per target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Shared(FeatureMap),
    PerTarget(Vec<FeatureMap>),
}

impl Basis {
    pub fn map(&self, j: usize) -> &FeatureMap {
        match self {
            Basis::Shared(m) => m,
            Basis::PerTarget(maps) => &maps[j],
        }
    }

    pub fn validate(&self, n_covariates: usize, n_targets: usize) -> Result<()> {
        let maps: Vec<&FeatureMap> = match self {
            Basis::Shared(m) => vec![m],
            Basis::PerTarget(maps) => {
                if maps.len() != n_targets {
                    return Err(Error::DimensionMismatch {
                        expected: n_targets,
                        got: maps.len(),
                    });
                }
                maps.iter().collect()
            }
        };
        for m in maps {
            let need = m.required_covariates();
            if need > n_covariates {
                return Err(Error::DimensionMismatch {
                    expected: need,
                    got: n_covariates,
                });
            }
        }
        Ok(())
    }

    /// Number of covariates the basis reads.
    pub fn required_covariates(&self) -> usize {
        match self {
            Basis::Shared(m) => m.required_covariates(),
            Basis::PerTarget(maps) => maps.iter().map(FeatureMap::required_covariates).max().unwrap_or(0),
        }
    }
}
