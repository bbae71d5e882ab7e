use std::path::Path;

use serde::{Deserialize, Serialize};

use super::registry::lookup_density;
use crate::error::{Error, Result};
use crate::posterior_gibbs::{GibbsConfig, LossMetric, MIN_OBSERVATIONS, MIN_RETAINED};
use crate::prior_model::PriorSpec;

pub const MIN_LADDER_POINTS: usize = 4;
pub const MIN_REPLICATIONS: usize = 3;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Fixed truncation; when absent `H = ⌊n ε_n²/log n⌋ ∨ 20`.
    #[serde(default)]
    pub truncation: Option<usize>,
}

impl ChainSettings {
    pub fn gibbs(&self, truncation: usize) -> GibbsConfig {
        GibbsConfig::new(truncation, self.iterations, self.burn_in, self.thin)
    }
}

fn default_loss() -> LossMetric {
    LossMetric::L1
}

fn default_resamples() -> usize {
    DEFAULT_BOOTSTRAP_RESAMPLES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateExperimentConfig {
    pub density: String,
    /// Defaults to the standard prior in the density's dimension.
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    pub ladder: Vec<usize>,
    pub replications: usize,
    pub chain: ChainSettings,
    #[serde(default = "default_loss")]
    pub loss: LossMetric,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    /// Smoothness used for the theoretical rate; defaults to the density's
    /// working smoothness.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Tail exponent used for the theoretical rate; defaults to the density's.
    #[serde(default)]
    pub tau: Option<f64>,
}

impl RateExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON config: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML config: {e}")))
    }

    /// Read a `.toml` or `.json` file; other extensions are tried as JSON,
    /// then TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml_str(&text)?,
            Some("json") => Self::from_json_str(&text)?,
            _ => Self::from_json_str(&text).or_else(|_| Self::from_toml_str(&text))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configured prior, or the standard one in the density's dimension.
    pub fn prior_spec(&self) -> Result<PriorSpec> {
        let d = lookup_density(&self.density)?.dim();
        let prior = self.prior.clone().unwrap_or_else(|| PriorSpec::standard(d));
        if prior.dim() != d {
            return Err(Error::Config(format!(
                "prior has dimension {} but density '{}' has {d}",
                prior.dim(),
                self.density
            )));
        }
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < MIN_LADDER_POINTS {
            return Err(Error::Config(format!("ladder needs at least {MIN_LADDER_POINTS} sample sizes")));
        }
        if self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("ladder must be strictly increasing".into()));
        }
        if self.ladder[0] < MIN_OBSERVATIONS {
            return Err(Error::Config(format!("sample sizes must be at least {MIN_OBSERVATIONS}")));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Config(format!("need at least {MIN_REPLICATIONS} replications")));
        }
        let c = &self.chain;
        if c.thin == 0 || c.iterations <= c.burn_in || (c.iterations - c.burn_in) / c.thin < MIN_RETAINED {
            return Err(Error::Config(format!(
                "chain settings must retain at least {MIN_RETAINED} draws after burn-in"
            )));
        }
        if self.bootstrap_resamples == 0 {
            return Err(Error::Config("bootstrap_resamples must be positive".into()));
        }
        self.prior_spec()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
density = "std-normal-d1"
ladder = [250, 500, 1000, 2000]
replications = 3
seed = 7

[chain]
iterations = 1500
burn_in = 500
thin = 5
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = RateExperimentConfig::from_toml_str(TOML).unwrap();
        a.validate().unwrap();
        let b = RateExperimentConfig::from_json_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss, LossMetric::L1);
        assert_eq!(a.bootstrap_resamples, DEFAULT_BOOTSTRAP_RESAMPLES);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = RateExperimentConfig::from_toml_str(TOML).unwrap();
        let mut c = base.clone();
        c.ladder = vec![500; 4];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.ladder = vec![250, 500, 1000];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.replications = 2;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.chain.thin = 50;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.prior = Some(PriorSpec::standard(2));
        assert!(c.validate().is_err());
        let mut c = base;
        c.density = "unknown".into();
        assert!(c.validate().is_err());
        assert!(RateExperimentConfig::from_toml_str("density = 3").is_err());
    }
}
