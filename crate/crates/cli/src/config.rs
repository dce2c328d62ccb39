//! Estimation settings read from JSON.

use std::path::Path;

use btmle_core::bayes::BayesConfig;
use btmle_core::classical::FluctuationForm;
use btmle_core::data::{ModelOrder, ModelSpec, TmleSpecs};
use btmle_core::rng::mix64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub outcome_order: ModelOrder,
    pub propensity_order: ModelOrder,
    /// Prior sd of every GLM coefficient.
    pub prior_scale: f64,
    /// Half-normal scale of the continuous-outcome error sd.
    pub error_sd_prior_scale: f64,
    /// Fluctuation form of the classical estimator.
    pub classical_form: FluctuationForm,
    pub bayes: BayesConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            outcome_order: ModelOrder::FirstOrder,
            propensity_order: ModelOrder::FirstOrder,
            prior_scale: 1.0,
            error_sd_prior_scale: 1.0,
            classical_form: FluctuationForm::OneParam,
            bayes: BayesConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn specs(&self) -> TmleSpecs {
        let mut outcome = ModelSpec::outcome(self.outcome_order);
        outcome.prior_scale = self.prior_scale;
        outcome.error_sd_prior_scale = self.error_sd_prior_scale;
        let mut propensity = ModelSpec::propensity(self.propensity_order);
        propensity.prior_scale = self.prior_scale;
        propensity.error_sd_prior_scale = self.error_sd_prior_scale;
        TmleSpecs { outcome, propensity }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.specs().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.bayes.validate().map_err(|e| CliError::Config(e.to_string()))
    }

    /// The same settings with the sampler seeded from `seed`.
    pub fn seeded(&self, seed: u64) -> FitConfig {
        let mut c = self.clone();
        c.bayes.sampler.seed = mix64(seed ^ SAMPLER_SEED_SALT);
        c
    }

    pub fn read(path: &Path) -> CliResult<FitConfig> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let cfg: FitConfig = serde_json::from_str(&text).map_err(CliError::json(path))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Separates the sampler seed from the data seed it is derived from.
const SAMPLER_SEED_SALT: u64 = 0x5a4d_504c_4552_0001;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: FitConfig = serde_json::from_str(r#"{"outcome_order":"second_order","bayes":{"sampler":{"n_draws":50}}}"#).unwrap();
        assert_eq!(c.outcome_order, ModelOrder::SecondOrder);
        assert_eq!(c.bayes.sampler.n_draws, 50);
        assert_eq!(c.bayes.sampler.n_warmup, 1000);
        assert_eq!(c.bayes.ss_max_rows, 2000);
    }

    #[test]
    fn unknown_and_invalid_settings_are_rejected() {
        assert!(serde_json::from_str::<FitConfig>(r#"{"outcome":"x"}"#).is_err());
        let c = FitConfig { prior_scale: -1.0, ..FitConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn seeding_is_deterministic() {
        let c = FitConfig::default();
        assert_eq!(c.seeded(3), c.seeded(3));
        assert_ne!(c.seeded(3).bayes.sampler.seed, c.seeded(4).bayes.sampler.seed);
    }
}
