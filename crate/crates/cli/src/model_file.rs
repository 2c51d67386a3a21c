//! The versioned JSON model file written by `fit` and read by `predict`.

use std::path::Path;

use anyhow::{bail, Context};
use hyperrect::method::{FittedPredictor, MethodConfig, RegionPredictor};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "hyperrect-model";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub schema_version: u32,
    pub method: MethodConfig,
    /// Seed of the train / calibration split.
    pub seed: u64,
    /// Rows in (train, cal1, cal2).
    pub split_sizes: [usize; 3],
    pub covariates: Vec<String>,
    pub targets: Vec<String>,
    pub predictor: FittedPredictor,
}

impl ModelFile {
    pub fn new(
        method: MethodConfig,
        seed: u64,
        split_sizes: [usize; 3],
        covariates: Vec<String>,
        targets: Vec<String>,
        predictor: FittedPredictor,
    ) -> Self {
        Self {
            format: FORMAT.into(),
            schema_version: SCHEMA_VERSION,
            method,
            seed,
            split_sizes,
            covariates,
            targets,
            predictor,
        }
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("loading model {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let head: serde_json::Value = serde_json::from_str(text)?;
        if head.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
            bail!("not a {FORMAT} file");
        }
        match head.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            other => bail!("model schema mismatch: found version {other:?}, this build reads {SCHEMA_VERSION}"),
        }
        let model: Self = serde_json::from_str(text)?;
        if model.covariates.len() != model.predictor.n_covariates()
            || model.targets.len() != model.predictor.n_targets()
        {
            bail!("model schema mismatch: column names do not match the fitted predictor");
        }
        Ok(model)
    }
}
