use serde::{Deserialize, Serialize};

use crate::backbones::BackboneConfig;
use crate::error::{Error, Result};
use crate::numkit::AdamW;

/// Which parts of the framework are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain ensembling: every branch sees the whole graph and differs only in seed.
    E,
    /// Ensembling over randomized subgraphs.
    Es,
    /// Randomized subgraphs plus the FCN aligning product on left-out features.
    Full,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::E => "e",
            Variant::Es => "es",
            Variant::Full => "full",
        }
    }

    pub fn randomizes_subgraphs(self) -> bool {
        !matches!(self, Variant::E)
    }

    pub fn aligning(self) -> bool {
        matches!(self, Variant::Full)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e" => Ok(Variant::E),
            "es" => Ok(Variant::Es),
            "full" => Ok(Variant::Full),
            other => Err(Error::Parameter(format!("unknown variant `{other}` (e, es, full)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Node keep rate.
    pub alpha: f64,
    /// Feature keep rate.
    pub beta: f64,
    /// Edge keep rate.
    pub gamma: f64,
    /// Number of branches `S`.
    pub branches: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub backbone: BackboneConfig,
    pub master_seed: u64,
    /// Keep the parameters with the best validation accuracy instead of the last epoch's.
    pub select_best_val: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta: 0.8,
            gamma: 0.9,
            branches: 10,
            epochs: 200,
            lr: 0.01,
            weight_decay: 5e-4,
            backbone: BackboneConfig::default(),
            master_seed: 0,
            select_best_val: false,
        }
    }
}

impl TrainConfig {
    /// Named sampling presets `(alpha, beta, gamma)`.
    pub fn preset(name: &str) -> Result<Self> {
        let (alpha, beta, gamma) = match name.to_ascii_lowercase().as_str() {
            "cresci15" => (0.95, 0.95, 0.95),
            "twibot20" => (0.8, 0.8, 0.9),
            "mgtab" => (0.6, 0.9, 0.8),
            other => {
                return Err(Error::Parameter(format!(
                    "unknown preset `{other}` (cresci15, twibot20, mgtab)"
                )))
            }
        };
        Ok(Self {
            alpha,
            beta,
            gamma,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Parameter(format!("{name} = {v} outside (0, 1]")));
            }
        }
        if self.branches == 0 {
            return Err(Error::Parameter("branch count S must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Parameter("lr must be positive and weight_decay non-negative".into()));
        }
        self.backbone.validate()
    }

    pub fn optimizer(&self) -> AdamW {
        AdamW {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamW::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_sampling_rates() {
        let m = TrainConfig::preset("mgtab").unwrap();
        assert_eq!((m.alpha, m.beta, m.gamma), (0.6, 0.9, 0.8));
        let t = TrainConfig::preset("Twibot20").unwrap();
        assert_eq!((t.alpha, t.beta, t.gamma, t.branches), (0.8, 0.8, 0.9, 10));
        assert!(TrainConfig::preset("cora").is_err());
    }

    #[test]
    fn rejects_out_of_range_rates() {
        let bad = TrainConfig {
            gamma: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn defaults_follow_reported_settings() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.lr, c.weight_decay, c.backbone.dropout), (200, 0.01, 5e-4, 0.5));
        assert_eq!((c.backbone.layers, c.backbone.hidden), (2, 128));
    }
}
