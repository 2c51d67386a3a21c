//! The built-in scenarios.

use super::{CovariateLaw, ErrorLaw, Expr, ScenarioSpec, Sizes, TargetSpec};
use crate::error::{Error, Result};
use crate::models::{Basis, FeatureMap};

pub const BUILTIN_NAMES: [&str; 10] = [
    "setup1",
    "setup2",
    "setup3",
    "setup4",
    "tendim",
    "balance-homo",
    "balance-hetero",
    "balance-normal3",
    "balance-gamma3",
    "bp-synthetic",
];

pub const DEFAULT_SEED: u64 = 42;

/// The four three-dimensional error correlations.
pub fn correlation_r(k: usize) -> Result<Vec<Vec<f64>>> {
    let (a, b, c) = match k {
        1 => (0.3, 0.6, 0.5),
        2 => (0.8, 0.8, 0.8),
        3 => (0.6, 0.3, 0.5),
        4 => (0.2, 0.2, 0.2),
        _ => return Err(Error::InvalidSpec(format!("no correlation matrix R{k} (expected 1-4)"))),
    };
    Ok(vec![vec![1.0, a, b], vec![a, 1.0, c], vec![b, c, 1.0]])
}

fn equicorrelation(p: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|a| (0..p).map(|b| if a == b { 1.0 } else { rho }).collect())
        .collect()
}

fn maps(name: &str, terms: &[&[&str]]) -> Result<Basis> {
    terms
        .iter()
        .enumerate()
        .map(|(j, t)| FeatureMap::parse(format!("{name}-y{}", j + 1), t))
        .collect::<Result<Vec<_>>>()
        .map(Basis::PerTarget)
}

fn normal() -> ErrorLaw {
    ErrorLaw::Normal { mean: 0.0, sd: 1.0 }
}

fn gamma(shape: f64, rate: f64) -> ErrorLaw {
    ErrorLaw::Gamma {
        shape,
        rate,
        shape_term: None,
    }
}

fn expr(parts: &[(f64, &str)]) -> Expr {
    Expr::parse(parts).expect("built-in expressions parse")
}

fn exp_unif_covariates() -> Vec<CovariateLaw> {
    vec![
        CovariateLaw::Exponential { rate: 0.2 },
        CovariateLaw::Uniform { min: -5.0, max: 5.0 },
    ]
}

/// Three-dimensional setups 1-4: gamma, gamma and shifted normal errors.
pub fn setup(k: usize) -> Result<ScenarioSpec> {
    let mut y3 = TargetSpec::new(expr(&[(1.0, "x2^2")]), normal());
    y3.shift = expr(&[(5.0, "x2")]);
    Ok(ScenarioSpec {
        name: format!("setup{k}"),
        covariates: exp_unif_covariates(),
        targets: vec![
            TargetSpec::new(expr(&[(5.0, "1"), (2.0, "x1")]), gamma(2.0, 0.2)),
            TargetSpec::new(expr(&[(3.0, "x1"), (1.0, "x1*x2")]), gamma(3.0, 0.5)),
            y3,
        ],
        correlation: correlation_r(k)?,
        basis: maps("setup", &[&["1", "x1"], &["1", "x1", "x1*x2"], &["1", "x2^2"]])?,
        sizes: Sizes {
            train: 500,
            cal1: 250,
            cal2: 250,
            test: 500,
        },
        seed: DEFAULT_SEED,
    })
}

fn tendim_covariates() -> Vec<CovariateLaw> {
    vec![
        CovariateLaw::Uniform { min: -2.0, max: 5.0 },
        CovariateLaw::Uniform { min: -5.0, max: -1.0 },
        CovariateLaw::Uniform { min: -6.0, max: 10.0 },
        CovariateLaw::Uniform { min: 0.0, max: 4.0 },
        CovariateLaw::UniformBetween { lower: 2, upper: 4 },
    ]
}

const TENDIM_MEANS: [(f64, &str); 10] = [
    (2.0, "x1"),
    (1.0, "x1"),
    (1.0, "x2^2"),
    (1.0, "x2*x5"),
    (1.0, "x5^2"),
    (1.0, "x1^2"),
    (1.0, "x4^2"),
    (1.0, "x3^2"),
    (1.0, "x4^2"),
    (1.0, "x1*x2"),
];

fn tendim_mean(j: usize) -> Expr {
    if j == 1 {
        expr(&[(1.0, "x1"), (1.0, "x1*x2")])
    } else {
        expr(&[TENDIM_MEANS[j]])
    }
}

fn tendim_basis(extra: &[&str]) -> Result<Basis> {
    let maps = (0..10)
        .map(|j| {
            let mut terms = vec!["1"];
            if j == 1 {
                terms.extend(["x1", "x1*x2"]);
            } else {
                terms.push(TENDIM_MEANS[j].1);
            }
            terms.extend_from_slice(extra);
            FeatureMap::parse(format!("tendim-y{}", j + 1), &terms)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Basis::PerTarget(maps))
}

fn tendim_sizes() -> Sizes {
    Sizes {
        train: 500,
        cal1: 250,
        cal2: 250,
        test: 500,
    }
}

/// Ten targets with correlation 0.5 and additive terms on four of them that
/// the fitted quantile models do not include.
pub fn tendim() -> Result<ScenarioSpec> {
    let shifts: [&[(f64, &str)]; 10] = [
        &[],
        &[],
        &[(5.0, "x2")],
        &[(1.0, "x5^2")],
        &[],
        &[(-2.0, "x1")],
        &[(-1.0, "x4")],
        &[],
        &[],
        &[],
    ];
    let targets = (0..10)
        .map(|j| {
            let mut t = TargetSpec::new(tendim_mean(j), normal());
            t.shift = expr(shifts[j]);
            t
        })
        .collect();
    Ok(ScenarioSpec {
        name: "tendim".into(),
        covariates: tendim_covariates(),
        targets,
        correlation: equicorrelation(10, 0.5),
        basis: tendim_basis(&[])?,
        sizes: tendim_sizes(),
        seed: DEFAULT_SEED,
    })
}

/// Ten targets, correlation 0.9, error scales 1..5 repeated; optionally with
/// conditional variance `|x1|`.
pub fn balance_tendim(hetero: bool) -> Result<ScenarioSpec> {
    let targets = (0..10)
        .map(|j| {
            let mut t = TargetSpec::new(tendim_mean(j), normal());
            t.scale = (j % 5 + 1) as f64;
            if hetero {
                t.scale_term = Some("sqrt_abs(x1)".parse().expect("valid term"));
            }
            t
        })
        .collect();
    Ok(ScenarioSpec {
        name: if hetero { "balance-hetero" } else { "balance-homo" }.into(),
        covariates: tendim_covariates(),
        targets,
        correlation: equicorrelation(10, 0.9),
        basis: tendim_basis(if hetero { &["sqrt_abs(x1)"] } else { &[] })?,
        sizes: tendim_sizes(),
        seed: DEFAULT_SEED,
    })
}

/// Three normal targets with mixed-sign correlations.
pub fn balance_normal3(hetero: bool) -> Result<ScenarioSpec> {
    let means = [
        expr(&[(5.0, "1"), (2.0, "x1")]),
        expr(&[(3.0, "x1"), (1.0, "x1*x2")]),
        expr(&[(5.0, "x2"), (1.0, "x2^2")]),
    ];
    let targets = means
        .into_iter()
        .map(|m| {
            let mut t = TargetSpec::new(m, normal());
            if hetero {
                t.scale_term = Some("sqrt_abs(x1)".parse().expect("valid term"));
            }
            t
        })
        .collect();
    let extra: &[&str] = if hetero { &["sqrt_abs(x1)"] } else { &[] };
    let terms: Vec<Vec<&str>> = [&["1", "x1"][..], &["1", "x1", "x1*x2"], &["1", "x2", "x2^2"]]
        .iter()
        .map(|t| t.iter().chain(extra).copied().collect())
        .collect();
    let term_refs: Vec<&[&str]> = terms.iter().map(Vec::as_slice).collect();
    Ok(ScenarioSpec {
        name: format!("balance-normal3-{}", if hetero { "hetero" } else { "homo" }),
        covariates: exp_unif_covariates(),
        targets,
        correlation: vec![vec![1.0, -0.8, -0.8], vec![-0.8, 1.0, 0.8], vec![-0.8, 0.8, 1.0]],
        basis: maps("normal3", &term_refs)?,
        sizes: Sizes {
            train: 2000,
            cal1: 250,
            cal2: 250,
            test: 500,
        },
        seed: DEFAULT_SEED,
    })
}

/// Three gamma targets mixed by `R_k`; the mixing breaks identical error
/// shapes across targets.
pub fn balance_gamma3(k: usize, hetero: bool) -> Result<ScenarioSpec> {
    let error = ErrorLaw::Gamma {
        shape: 2.0,
        rate: 0.2,
        shape_term: hetero.then(|| "abs(x2)".parse().expect("valid term")),
    };
    let terms: &[&str] = if hetero {
        &["1", "x1", "abs(x2)", "sqrt_abs(x2)"]
    } else {
        &["1", "x1"]
    };
    Ok(ScenarioSpec {
        name: format!("balance-gamma3-r{k}-{}", if hetero { "hetero" } else { "homo" }),
        covariates: exp_unif_covariates(),
        targets: (0..3)
            .map(|_| TargetSpec::new(expr(&[(1.0, "x1")]), error.clone()))
            .collect(),
        correlation: correlation_r(k)?,
        basis: Basis::Shared(FeatureMap::parse("gamma3", terms)?),
        sizes: Sizes {
            train: 2000,
            cal1: 100,
            cal2: 100,
            test: 500,
        },
        seed: DEFAULT_SEED,
    })
}

/// Two correlated heteroskedastic targets on thirty covariates, sized like a
/// 1289-row study split 900 / 200 / 189.
pub fn bp_synthetic() -> Result<ScenarioSpec> {
    let d = 30;
    let mut covariates = vec![CovariateLaw::Uniform { min: 0.0, max: 1.0 }; d];
    covariates[3] = CovariateLaw::Uniform { min: 0.5, max: 1.5 };
    let scale_term = Some("x4".parse().expect("valid term"));
    let y1 = TargetSpec {
        mean: expr(&[(120.0, "1"), (20.0, "x1"), (10.0, "x2"), (-8.0, "x3")]),
        error: normal(),
        shift: Expr::default(),
        scale: 10.0,
        scale_term: scale_term.clone(),
    };
    let y2 = TargetSpec {
        mean: expr(&[(80.0, "1"), (10.0, "x1"), (5.0, "x2"), (4.0, "x5")]),
        error: normal(),
        shift: Expr::default(),
        scale: 6.0,
        scale_term,
    };
    Ok(ScenarioSpec {
        name: "bp-synthetic".into(),
        covariates,
        targets: vec![y1, y2],
        correlation: vec![vec![1.0, 0.7], vec![0.7, 1.0]],
        basis: Basis::Shared(FeatureMap::linear(d)),
        sizes: Sizes {
            train: 900,
            cal1: 100,
            cal2: 100,
            test: 189,
        },
        seed: DEFAULT_SEED,
    })
}

fn parse_variant(variant: Option<&str>) -> Result<(Option<usize>, bool)> {
    let Some(v) = variant else {
        return Ok((None, false));
    };
    let mut k = None;
    let mut hetero = false;
    for part in v.split('-') {
        match part {
            "homo" => hetero = false,
            "hetero" => hetero = true,
            r if r.len() == 2 && r.starts_with('r') => {
                k = Some(
                    r[1..]
                        .parse()
                        .map_err(|_| Error::InvalidSpec(format!("bad variant {v:?}")))?,
                )
            }
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "bad variant {v:?} (expected e.g. r2-hetero)"
                )))
            }
        }
    }
    Ok((k, hetero))
}

/// Looks up a built-in scenario. `variant` selects `homo`/`hetero` for the
/// three-dimensional balance scenarios and `r1`..`r4` for the gamma one,
/// e.g. `r3-hetero`.
pub fn builtin(name: &str, variant: Option<&str>) -> Result<ScenarioSpec> {
    let (k, hetero) = parse_variant(variant)?;
    let only_default = |spec: Result<ScenarioSpec>| {
        if variant.is_some() {
            Err(Error::InvalidSpec(format!("scenario {name} has no variants")))
        } else {
            spec
        }
    };
    match name {
        "setup1" => only_default(setup(1)),
        "setup2" => only_default(setup(2)),
        "setup3" => only_default(setup(3)),
        "setup4" => only_default(setup(4)),
        "tendim" => only_default(tendim()),
        "balance-homo" => only_default(balance_tendim(false)),
        "balance-hetero" => only_default(balance_tendim(true)),
        "balance-normal3" if k.is_none() => balance_normal3(hetero),
        "balance-gamma3" => balance_gamma3(k.unwrap_or(1), hetero),
        "bp-synthetic" => only_default(bp_synthetic()),
        _ => Err(Error::InvalidSpec(format!(
            "unknown scenario {name:?} (expected one of {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}
