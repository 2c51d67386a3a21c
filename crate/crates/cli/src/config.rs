//! Simulation config files (JSON or TOML).

use std::path::Path;

use anyhow::{bail, Context};
use hyperrect::cqhr::ReferenceDim;
use hyperrect::method::{Method, MethodConfig};
use hyperrect::simgen::{builtin, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn default_methods() -> Vec<Method> {
    vec![Method::Cqhr]
}

fn default_alpha() -> f64 {
    0.1
}

fn default_replicates() -> usize {
    200
}

fn default_n_test() -> usize {
    500
}

fn default_seed() -> u64 {
    42
}

/// A Monte-Carlo run. Exactly one of `builtin` and `scenario` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub reference: ReferenceDim,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_coverage: Option<f64>,
}

impl SimulationConfig {
    pub fn for_builtin(name: &str, variant: Option<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            builtin: Some(name.to_owned()),
            variant,
            scenario: None,
            methods: default_methods(),
            alpha: default_alpha(),
            replicates: default_replicates(),
            n_test: default_n_test(),
            seed: default_seed(),
            reference: ReferenceDim::default(),
            initial_coverage: None,
        }
    }

    pub fn parse(text: &str, toml_format: bool) -> anyhow::Result<Self> {
        let cfg: Self = if toml_format {
            toml::from_str(text)?
        } else {
            serde_json::from_str(text)?
        };
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let toml_format = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => true,
            Some("json") => false,
            _ => {
                return Err(CliError::usage(format!(
                    "config {} must end in .json or .toml",
                    path.display()
                )))
            }
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::parse(&text, toml_format).with_context(|| format!("parsing {}", path.display()))?)
    }

    pub fn method_configs(&self) -> Vec<MethodConfig> {
        self.methods
            .iter()
            .map(|&method| MethodConfig {
                method,
                alpha: self.alpha,
                reference: self.reference,
                initial_coverage: self.initial_coverage,
            })
            .collect()
    }

    pub fn resolve_scenario(&self) -> Result<ScenarioSpec, CliError> {
        let spec = match (&self.builtin, &self.scenario) {
            (Some(name), None) => builtin(name, self.variant.as_deref()).map_err(|e| CliError::usage(e.to_string()))?,
            (None, Some(spec)) => {
                if self.variant.is_some() {
                    return Err(CliError::usage("variant only applies to built-in scenarios"));
                }
                spec.clone()
            }
            _ => return Err(CliError::usage("set exactly one of builtin and scenario")),
        };
        spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
schema_version = 1
methods = ["cqhr", "bonf-cqr"]
alpha = 0.2
replicates = 3
n_test = 10
seed = 7
reference = "min_variability"

[scenario]
name = "tiny"
seed = 1
correlation = [[1.0, 0.5], [0.5, 1.0]]

[[scenario.covariates]]
law = "uniform"
min = 0.0
max = 1.0

[[scenario.targets]]
mean = [{ coef = 1.0, term = "x1" }]
error = { family = "normal", sd = 1.0 }

[[scenario.targets]]
mean = [{ coef = 2.0, term = "1" }]
error = { family = "gamma", shape = 2.0, rate = 1.0 }
scale = 3.0
scale_term = "sqrt_abs(x1)"

[scenario.basis.shared]
name = "lin"
terms = ["1", "x1"]

[scenario.sizes]
train = 30
cal1 = 10
cal2 = 10
test = 5
"#;

    #[test]
    fn toml_and_json_round_trip() {
        let cfg = SimulationConfig::parse(TOML, true).unwrap();
        assert_eq!(cfg.methods, vec![Method::Cqhr, Method::BonfCqr]);
        assert_eq!(cfg.reference, ReferenceDim::MinVariability);
        cfg.resolve_scenario().unwrap();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(SimulationConfig::parse(&json, false).unwrap(), cfg);
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(SimulationConfig::parse(&toml_text, true).unwrap(), cfg);
    }

    #[test]
    fn defaults_and_version() {
        let cfg = SimulationConfig::parse(r#"{"schema_version": 1, "builtin": "setup2"}"#, false).unwrap();
        assert_eq!(cfg, SimulationConfig::for_builtin("setup2", None));
        assert!(SimulationConfig::parse(r#"{"schema_version": 9, "builtin": "setup2"}"#, false).is_err());
        assert!(SimulationConfig::parse(r#"{"schema_version": 1, "bultin": "x"}"#, false).is_err());
    }

    #[test]
    fn scenario_source_must_be_unique() {
        let mut cfg = SimulationConfig::for_builtin("setup1", None);
        cfg.scenario = Some(cfg.resolve_scenario().unwrap());
        assert!(matches!(cfg.resolve_scenario(), Err(CliError::Usage(_))));
        let unknown = SimulationConfig::for_builtin("setup9", None);
        assert!(matches!(unknown.resolve_scenario(), Err(CliError::Usage(_))));
    }
}
