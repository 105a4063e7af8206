use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::{TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::graphstore::{generate_synthetic, load_dataset, MultiRelationGraph, SyntheticParams};
use crate::metrics::DatasetSummary;

/// Everything one experiment command needs. Mirrors the JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory in the dataset format; exclusive with `synthetic`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticParams>,
    pub train: TrainConfig,
    pub variant: Variant,
    /// One run per master seed.
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synthetic: Some(SyntheticParams::default()),
            train: TrainConfig::default(),
            variant: Variant::Full,
            seeds: vec![0],
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Load { line, message, .. } => Error::load(path, line, message),
            other => other,
        })
    }

    /// Parses a config; naming a `dataset` switches off the default synthetic data.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let load_err = |e: serde_json::Error| Error::load("<config>", e.line(), e.to_string());
        let mut cfg: Self = serde_json::from_str(text).map_err(load_err)?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(load_err)?;
        let names_dataset_only = value.get("dataset").is_some() && value.get("synthetic").is_none();
        if names_dataset_only {
            cfg.synthetic = None;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => return Err(Error::Parameter("give either a dataset path or synthetic parameters, not both".into())),
            (None, None) => return Err(Error::Parameter("no dataset: give a dataset path or synthetic parameters".into())),
            _ => {}
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("the seed list is empty".into()));
        }
        self.train.validate()
    }

    /// Loads or generates the graph, plus a short description of its origin.
    pub fn load_graph(&self) -> Result<(MultiRelationGraph, String)> {
        self.validate()?;
        match (&self.dataset, &self.synthetic) {
            (Some(dir), _) => Ok((load_dataset(dir)?, dir.display().to_string())),
            (None, Some(p)) => Ok((generate_synthetic(p)?, format!("synthetic(seed={})", p.seed))),
            (None, None) => unreachable!("validated above"),
        }
    }
}

pub fn dataset_summary(g: &MultiRelationGraph, source: impl Into<String>) -> DatasetSummary {
    DatasetSummary {
        source: source.into(),
        nodes: g.n(),
        features: g.m(),
        relations: g.k(),
        edges: g.num_edges(),
        classes: g.num_classes(),
        test_nodes: g.splits().test.len(),
    }
}

/// Hyperparameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    Beta,
    Gamma,
    Branches,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::Gamma => "gamma",
            SweepParam::Branches => "S",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Alpha => cfg.alpha = value,
            SweepParam::Beta => cfg.beta = value,
            SweepParam::Gamma => cfg.gamma = value,
            SweepParam::Branches => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Parameter(format!("S must be a positive integer, got {value}")));
                }
                cfg.branches = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepParam::Alpha),
            "beta" => Ok(SweepParam::Beta),
            "gamma" => Ok(SweepParam::Gamma),
            "S" | "s" | "branches" => Ok(SweepParam::Branches),
            other => Err(Error::Parameter(format!("cannot sweep `{other}` (alpha, beta, gamma, S)"))),
        }
    }
}
