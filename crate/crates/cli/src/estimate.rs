//! Uniform front end over the classical and Bayesian estimators.

use btmle_core::bayes::{self, BayesMethod, BayesTmleResult, InitialPosterior};
use btmle_core::classical::{fit_classical_with, ClassicalTmleFit, FluctuationForm};
use btmle_core::data::Dataset;
use btmle_core::draws::Diagnostics;
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Classical,
    BTmleM,
    BTmleSS,
    BnTmle1p,
    BnTmle2p,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Classical, Method::BTmleM, Method::BTmleSS, Method::BnTmle1p, Method::BnTmle2p];

    pub fn label(self) -> &'static str {
        match self {
            Method::Classical => "Classical",
            Method::BTmleM => "BTmleM",
            Method::BTmleSS => "BTmleSS",
            Method::BnTmle1p => "BnTmle1p",
            Method::BnTmle2p => "BnTmle2p",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Self::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }

    pub fn bayes(self) -> Option<BayesMethod> {
        match self {
            Method::Classical => None,
            Method::BTmleM => Some(BayesMethod::BTmleM),
            Method::BTmleSS => Some(BayesMethod::BTmleSS),
            Method::BnTmle1p => Some(BayesMethod::BnTmle1p),
            Method::BnTmle2p => Some(BayesMethod::BnTmle2p),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One estimator's ATE summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub method: Method,
    pub ate_mean: f64,
    pub ci95: (f64, f64),
    /// Posterior sd of the ATE, or the influence-curve standard error.
    pub sd: f64,
    pub fluctuation_form: FluctuationForm,
    /// Point estimate (classical) or posterior mean of the fluctuation.
    pub epsilon: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    /// Every sampled block has split R-hat below the threshold.
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kde: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl Estimate {
    pub fn contains(&self, truth: f64) -> bool {
        self.ci95.0 <= truth && truth <= self.ci95.1
    }

    pub fn width(&self) -> f64 {
        self.ci95.1 - self.ci95.0
    }

    pub fn from_classical(fit: &ClassicalTmleFit) -> Estimate {
        Estimate {
            method: Method::Classical,
            ate_mean: fit.ate,
            ci95: fit.ci95,
            sd: fit.se,
            fluctuation_form: fit.fluctuation_form,
            epsilon: fit.epsilon.clone(),
            n_draws: None,
            diagnostics: None,
            converged: true,
            kde: Vec::new(),
            warnings: fit.warnings.clone(),
            samples: Vec::new(),
        }
    }

    pub fn from_bayes(method: Method, r: BayesTmleResult) -> Estimate {
        let epsilon = match r.form {
            FluctuationForm::OneParam => ["epsilon"].as_slice(),
            FluctuationForm::TwoParam => ["epsilon0", "epsilon1"].as_slice(),
        }
        .iter()
        .filter_map(|n| r.draws.block(n).map(|b| b.mean()[0]))
        .collect();
        let converged = r.draws.diagnostics.converged();
        Estimate {
            method,
            ate_mean: r.ate.mean,
            ci95: (r.ate.ci_low, r.ate.ci_high),
            sd: r.ate.sd,
            fluctuation_form: r.form,
            epsilon,
            n_draws: Some(r.ate.samples.len()),
            diagnostics: Some(r.draws.diagnostics.clone()),
            converged,
            kde: r.ate.kde,
            warnings: r.warnings,
            samples: r.ate.samples,
        }
    }

    /// Result JSON. Classical fits also carry `ate` and `se`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let (Method::Classical, Some(obj)) = (self.method, v.as_object_mut()) {
            obj.insert("ate".into(), self.ate_mean.into());
            obj.insert("se".into(), self.sd.into());
        }
        v
    }
}

pub fn run_method(method: Method, dataset: &Dataset, cfg: &FitConfig) -> btmle_core::Result<Estimate> {
    let specs = cfg.specs();
    match method.bayes() {
        None => fit_classical_with(dataset, &specs, cfg.classical_form, &cfg.bayes.options).map(|f| Estimate::from_classical(&f)),
        Some(b) => bayes::fit_bayes(b, dataset, &specs, &cfg.bayes).map(|r| Estimate::from_bayes(method, r)),
    }
}

/// Run several estimators on one dataset. B-TMLE-M and B-TMLE-SS share
/// their outcome and propensity posteriors. Failures are kept per method.
pub fn run_methods(methods: &[Method], dataset: &Dataset, cfg: &FitConfig) -> Vec<(Method, btmle_core::Result<Estimate>)> {
    let specs = cfg.specs();
    let sequential = methods.iter().filter(|m| matches!(m, Method::BTmleM | Method::BTmleSS)).count();
    let mut initial: Option<btmle_core::Result<InitialPosterior>> = None;
    methods
        .iter()
        .map(|&m| {
            let r = match m {
                Method::BTmleM | Method::BTmleSS if sequential > 1 => {
                    let init = initial.get_or_insert_with(|| bayes::fit_initial(dataset, &specs, &cfg.bayes));
                    match init {
                        Ok(init) => {
                            let fit = if m == Method::BTmleM {
                                bayes::fit_btmle_m_from(init, dataset, FluctuationForm::OneParam, &cfg.bayes)
                            } else {
                                bayes::fit_btmle_ss_from(init, dataset, FluctuationForm::OneParam, &cfg.bayes)
                            };
                            fit.map(|r| Estimate::from_bayes(m, r))
                        }
                        Err(e) => Err(e.clone()),
                    }
                }
                _ => run_method(m, dataset, cfg),
            };
            (m, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use btmle_core::simgen::{gen_dataset, DgpSpec};

    fn quick() -> FitConfig {
        let mut c = FitConfig::default();
        c.bayes.sampler.n_warmup = 100;
        c.bayes.sampler.n_draws = 60;
        c
    }

    #[test]
    fn labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.label()), Some(m));
        }
        assert_eq!(Method::parse("nope"), None);
    }

    #[test]
    fn shared_initial_stage_matches_separate_runs() {
        let d = gen_dataset(&DgpSpec::binary_case_study(150, 4)).unwrap();
        let cfg = quick();
        let joint = run_methods(&[Method::BTmleM, Method::BTmleSS], &d, &cfg);
        for (m, r) in joint {
            assert_eq!(r.unwrap(), run_method(m, &d, &cfg).unwrap(), "{m}");
        }
    }

    #[test]
    fn classical_json_has_ate_and_se() {
        let d = gen_dataset(&DgpSpec::binary_case_study(200, 5)).unwrap();
        let e = run_method(Method::Classical, &d, &quick()).unwrap();
        let v = e.to_json();
        assert_eq!(v["ate"], v["ate_mean"]);
        assert_eq!(v["se"].as_f64().unwrap(), e.sd);
        assert!(v.get("kde").is_none());
    }
}
