//! Bayesian TMLE: two sequential estimators (B-TMLE-M, B-TMLE-SS) and the
//! joint network estimator (BN-TMLE).
//!
//! The sequential estimators first sample the outcome and propensity
//! posteriors, summarize the per-draw initial predictions and clever
//! covariates row by row, then sample a fluctuation model. BN-TMLE samples
//! outcome, propensity and fluctuation parameters in a single posterior.
//! All four report the ATE through the same interventional prediction:
//! for every draw, set the treatment of every row to 1 and to 0, target the
//! predictions with that draw's fluctuation, and difference the means.

mod density;
mod predict;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

pub use density::{BnDensity, Priors, SsDensity, SummaryStats, SUMMARY_SD_FLOOR};

use crate::ate::{AteDistribution, PredictionMatrix};
use crate::classical::{FluctuationForm, TmleOptions};
use crate::data::{build_design, encode_dataset, Dataset, EncodingMeta, ModelSpec, OutcomeKind, OutcomeScale, TmleSpecs};
use crate::draws::PosteriorDraws;
use crate::glm::{LinearDensity, LogisticDensity};
use crate::linalg::Matrix;
use crate::rng::{mix64, stream_rng};
use crate::sampler::{sample_blocks, Keep, SamplerConfig};
use crate::{Error, Result};

use predict::{epsilon_draws, mean_probability_logit, Predictor};

/// Settings shared by the Bayesian estimators.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BayesConfig {
    pub sampler: SamplerConfig,
    pub options: TmleOptions,
    /// Largest number of rows B-TMLE-SS samples latents for; larger datasets
    /// are subsampled for the fluctuation stage.
    pub ss_max_rows: usize,
    /// Prior standard deviation of the fluctuation parameters.
    pub epsilon_prior_scale: f64,
    /// Keep the `d × m` targeted prediction matrices in the result.
    pub materialize_predictions: bool,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            options: TmleOptions::default(),
            ss_max_rows: 2000,
            epsilon_prior_scale: 1.0,
            materialize_predictions: false,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.options.validate()?;
        if self.ss_max_rows == 0 {
            return Err(Error::InvalidConfig("ss_max_rows must be positive".into()));
        }
        if !(self.epsilon_prior_scale > 0.0 && self.epsilon_prior_scale.is_finite()) {
            return Err(Error::InvalidConfig("epsilon_prior_scale must be positive".into()));
        }
        Ok(())
    }

    fn stage(&self, k: u64) -> SamplerConfig {
        self.sampler.with_seed(mix64(self.sampler.seed.wrapping_add(k)))
    }
}

const STAGE_OUTCOME: u64 = 1;
const STAGE_PROPENSITY: u64 = 2;
const STAGE_MEAN: u64 = 3;
const STAGE_SS: u64 = 4;
const STAGE_NETWORK: u64 = 5;
const SUBSAMPLE_STREAM: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BayesMethod {
    BTmleM,
    BTmleSS,
    BnTmle1p,
    BnTmle2p,
}

impl BayesMethod {
    pub const ALL: [BayesMethod; 4] = [BayesMethod::BTmleM, BayesMethod::BTmleSS, BayesMethod::BnTmle1p, BayesMethod::BnTmle2p];

    pub fn label(self) -> &'static str {
        match self {
            BayesMethod::BTmleM => "BTmleM",
            BayesMethod::BTmleSS => "BTmleSS",
            BayesMethod::BnTmle1p => "BnTmle1p",
            BayesMethod::BnTmle2p => "BnTmle2p",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }

    pub fn form(self) -> FluctuationForm {
        match self {
            BayesMethod::BnTmle2p => FluctuationForm::TwoParam,
            _ => FluctuationForm::OneParam,
        }
    }
}

/// A fitted Bayesian TMLE.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesTmleResult {
    pub method: BayesMethod,
    pub form: FluctuationForm,
    /// Every sampled block needed for prediction plus all stage diagnostics.
    pub draws: PosteriorDraws,
    pub ate: AteDistribution,
    pub outcome_kind: OutcomeKind,
    /// Present only when [`BayesConfig::materialize_predictions`] is set.
    pub yf_treated: Option<PredictionMatrix>,
    pub yf_control: Option<PredictionMatrix>,
    pub outcome_meta: EncodingMeta,
    pub propensity_meta: EncodingMeta,
    pub scale: OutcomeScale,
    pub options: TmleOptions,
    /// Rows the fluctuation stage was fitted on.
    pub fluctuation_rows: usize,
    /// `(row, draw)` pairs whose propensity needed the numerical guard.
    pub clamped: usize,
    pub warnings: Vec<String>,
}

fn outcome_draws_for(
    dataset: &Dataset,
    x: &Matrix,
    y: &[f64],
    spec: &ModelSpec,
    sampler: &SamplerConfig,
) -> Result<PosteriorDraws> {
    match dataset.outcome_kind() {
        OutcomeKind::Binary => {
            let m = LogisticDensity::new(x, y, spec.prior_scale, "theta_Y")?;
            sample_blocks(&m, sampler, "outcome", Keep::All)
        }
        OutcomeKind::Continuous => {
            let m = LinearDensity::new(x, y, spec.prior_scale, spec.error_sd_prior_scale, "theta_Y", "sigma_o")?;
            sample_blocks(&m, sampler, "outcome", Keep::All)
        }
    }
}

/// Posterior of the outcome model coefficients (block `theta_Y`, plus
/// `sigma_o` for continuous outcomes, fitted on the standardized outcome).
pub fn fit_bayes_outcome(dataset: &Dataset, spec: &ModelSpec, sampler: &SamplerConfig) -> Result<PosteriorDraws> {
    spec.validate()?;
    let x = build_design(dataset, spec)?;
    let (y, _) = dataset.fitting_outcome()?;
    outcome_draws_for(dataset, &x.values, &y, spec, sampler)
}

/// Posterior of the propensity model coefficients (block `theta_A`).
pub fn fit_bayes_propensity(dataset: &Dataset, spec: &ModelSpec, sampler: &SamplerConfig) -> Result<PosteriorDraws> {
    spec.validate()?;
    let x = build_design(dataset, spec)?;
    let a: Vec<f64> = dataset.treatment().iter().map(|&a| f64::from(a)).collect();
    let m = LogisticDensity::new(&x.values, &a, spec.prior_scale, "theta_A")?;
    sample_blocks(&m, sampler, "propensity", Keep::All)
}

/// Outcome and propensity posteriors shared by the sequential estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPosterior {
    pub draws: PosteriorDraws,
    pub specs: TmleSpecs,
    pub outcome_meta: EncodingMeta,
    pub propensity_meta: EncodingMeta,
    pub scale: OutcomeScale,
}

/// Sample the outcome and propensity posteriors of the sequential
/// estimators.
pub fn fit_initial(dataset: &Dataset, specs: &TmleSpecs, config: &BayesConfig) -> Result<InitialPosterior> {
    specs.validate()?;
    config.validate()?;
    dataset.require_both_arms()?;
    let (y, scale) = dataset.fitting_outcome()?;
    let xo = build_design(dataset, &specs.outcome)?;
    let xa = build_design(dataset, &specs.propensity)?;
    let out = outcome_draws_for(dataset, &xo.values, &y, &specs.outcome, &config.stage(STAGE_OUTCOME))?;
    let a: Vec<f64> = dataset.treatment().iter().map(|&a| f64::from(a)).collect();
    let pm = LogisticDensity::new(&xa.values, &a, specs.propensity.prior_scale, "theta_A")?;
    let prop = sample_blocks(&pm, &config.stage(STAGE_PROPENSITY), "propensity", Keep::All)?;
    Ok(InitialPosterior {
        draws: out.merge(prop)?,
        specs: *specs,
        outcome_meta: xo.meta,
        propensity_meta: xa.meta,
        scale,
    })
}

/// Per-draw initial outcome predictions and one-parameter clever
/// covariates, `d × m` each. With `a = None` every row keeps its observed
/// treatment; otherwise the treatment is set to `a` for every row.
/// Continuous predictions are on the original outcome scale.
pub fn predict_matrices(
    draws: &PosteriorDraws,
    dataset: &Dataset,
    specs: &TmleSpecs,
    a: Option<u8>,
    options: &TmleOptions,
) -> Result<(PredictionMatrix, PredictionMatrix)> {
    let xo = build_design(dataset, &specs.outcome)?;
    let xa = build_design(dataset, &specs.propensity)?;
    let (_, scale) = dataset.fitting_outcome()?;
    let (xo, treat) = match a {
        None => (xo, dataset.treatment().to_vec()),
        Some(a) => (xo.with_treatment(a)?, alloc::vec![a; dataset.n_rows()]),
    };
    let p = Predictor::new(draws, &xa, xo.cols(), dataset.outcome_kind(), scale, *options)?;
    Ok(p.initial_matrices(&xo, &treat))
}

struct Assembled<'a> {
    method: BayesMethod,
    form: FluctuationForm,
    draws: PosteriorDraws,
    outcome_meta: &'a EncodingMeta,
    propensity_meta: &'a EncodingMeta,
    scale: OutcomeScale,
    fluctuation_rows: usize,
    warnings: Vec<String>,
}

fn assemble(dataset: &Dataset, config: &BayesConfig, parts: Assembled<'_>) -> Result<BayesTmleResult> {
    let xo1 = encode_dataset(dataset, parts.outcome_meta, Some(1))?;
    let xo0 = encode_dataset(dataset, parts.outcome_meta, Some(0))?;
    let xa = encode_dataset(dataset, parts.propensity_meta, None)?;
    let kind = dataset.outcome_kind();
    let eps = epsilon_draws(&parts.draws, parts.form)?;
    let predictor = Predictor::new(&parts.draws, &xa, xo1.cols(), kind, parts.scale, config.options)?;
    let t = predictor.targeted(&xo1, &xo0, parts.form, &eps, config.materialize_predictions)?;
    let samples = t.means1.iter().zip(&t.means0).map(|(a, b)| a - b).collect();
    let ate = AteDistribution::from_samples(samples)?;
    let mut warnings = parts.draws.diagnostics.warnings.clone();
    warnings.extend(parts.warnings);
    if t.clamped > 0 {
        warnings.push(format!("{} propensity predictions clamped", t.clamped));
    }
    let (yf_treated, yf_control) = match t.matrices {
        Some((m1, m0)) => (Some(m1), Some(m0)),
        None => (None, None),
    };
    Ok(BayesTmleResult {
        method: parts.method,
        form: parts.form,
        draws: parts.draws,
        ate,
        outcome_kind: kind,
        yf_treated,
        yf_control,
        outcome_meta: parts.outcome_meta.clone(),
        propensity_meta: parts.propensity_meta.clone(),
        scale: parts.scale,
        options: config.options,
        fluctuation_rows: parts.fluctuation_rows,
        clamped: t.clamped,
        warnings,
    })
}

/// Split a two-column `epsilon` block into `epsilon0` and `epsilon1`.
fn split_epsilon(mut draws: PosteriorDraws) -> Result<PosteriorDraws> {
    let b = draws.remove("epsilon").ok_or_else(|| Error::MissingBlock("epsilon".into()))?;
    let m = b.n_draws();
    draws.insert("epsilon0", 1, (0..m).map(|j| b.draw(j)[0]).collect())?;
    draws.insert("epsilon1", 1, (0..m).map(|j| b.draw(j)[1]).collect())?;
    Ok(draws)
}

/// B-TMLE-M from already sampled initial posteriors.
pub fn fit_btmle_m_from(
    initial: &InitialPosterior,
    dataset: &Dataset,
    form: FluctuationForm,
    config: &BayesConfig,
) -> Result<BayesTmleResult> {
    config.validate()?;
    let kind = dataset.outcome_kind();
    let (y, _) = dataset.fitting_outcome()?;
    let xo = encode_dataset(dataset, &initial.outcome_meta, None)?;
    let xa = encode_dataset(dataset, &initial.propensity_meta, None)?;
    let predictor = Predictor::new(&initial.draws, &xa, xo.cols(), kind, initial.scale, config.options)?;
    let (_, mean_init, mean_h01) = predictor.row_summaries(&xo, dataset.treatment());

    let d = dataset.n_rows();
    let covariates = match form {
        FluctuationForm::OneParam => Matrix::column_vector(&mean_h01.iter().map(|h| h[1] - h[0]).collect::<Vec<_>>()),
        FluctuationForm::TwoParam => {
            Matrix::from_vec(d, 2, mean_h01.iter().flat_map(|h| [h[0], h[1]]).collect())?
        }
    };
    let stage = config.stage(STAGE_MEAN);
    let fluct = match kind {
        OutcomeKind::Binary => {
            let offset: Vec<f64> = mean_init.iter().map(|&p| mean_probability_logit(p)).collect();
            let m = LogisticDensity::new(&covariates, &y, config.epsilon_prior_scale, "epsilon")?.with_offset(&offset)?;
            sample_blocks(&m, &stage, "fluctuation", Keep::All)?
        }
        OutcomeKind::Continuous => {
            let m = LinearDensity::new(
                &covariates,
                &y,
                config.epsilon_prior_scale,
                initial.specs.outcome.error_sd_prior_scale,
                "epsilon",
                "sigma_xi",
            )?
            .with_offset(&mean_init)?;
            sample_blocks(&m, &stage, "fluctuation", Keep::All)?
        }
    };
    let fluct = match form {
        FluctuationForm::OneParam => fluct,
        FluctuationForm::TwoParam => split_epsilon(fluct)?,
    };
    assemble(
        dataset,
        config,
        Assembled {
            method: BayesMethod::BTmleM,
            form,
            draws: initial.draws.clone().merge(fluct)?,
            outcome_meta: &initial.outcome_meta,
            propensity_meta: &initial.propensity_meta,
            scale: initial.scale,
            fluctuation_rows: d,
            warnings: Vec::new(),
        },
    )
}

/// Deterministic subset of `k` of `n` row indices, in increasing order.
fn subsample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(mix64(seed), SUBSAMPLE_STREAM);
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// B-TMLE-SS from already sampled initial posteriors.
pub fn fit_btmle_ss_from(
    initial: &InitialPosterior,
    dataset: &Dataset,
    form: FluctuationForm,
    config: &BayesConfig,
) -> Result<BayesTmleResult> {
    config.validate()?;
    let kind = dataset.outcome_kind();
    let (y, _) = dataset.fitting_outcome()?;
    let xo = encode_dataset(dataset, &initial.outcome_meta, None)?;
    let xa = encode_dataset(dataset, &initial.propensity_meta, None)?;
    let predictor = Predictor::new(&initial.draws, &xa, xo.cols(), kind, initial.scale, config.options)?;
    let (stats, _, _) = predictor.row_summaries(&xo, dataset.treatment());

    let d = dataset.n_rows();
    let mut warnings = Vec::new();
    let (stats, a, y) = if d > config.ss_max_rows {
        let rows = subsample_rows(d, config.ss_max_rows, config.sampler.seed);
        warnings.push(format!("B-TMLE-SS fluctuation fitted on a subsample of {} of {d} rows", rows.len()));
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let sub = SummaryStats {
            mu_yinit: pick(&stats.mu_yinit),
            sd_yinit: pick(&stats.sd_yinit),
            mu_h: pick(&stats.mu_h),
            sd_h: pick(&stats.sd_h),
        };
        let a: Vec<u8> = rows.iter().map(|&i| dataset.treatment()[i]).collect();
        (sub, a, pick(&y))
    } else {
        (stats, dataset.treatment().to_vec(), y)
    };
    let priors = Priors {
        theta_y: initial.specs.outcome.prior_scale,
        theta_a: initial.specs.propensity.prior_scale,
        epsilon: config.epsilon_prior_scale,
        sigma: initial.specs.outcome.error_sd_prior_scale,
    };
    let model = SsDensity::new(&stats, &a, &y, kind, form, priors);
    let keep: &[&str] = match (form, kind) {
        (FluctuationForm::OneParam, OutcomeKind::Binary) => &["epsilon"],
        (FluctuationForm::OneParam, OutcomeKind::Continuous) => &["epsilon", "sigma_xi"],
        (FluctuationForm::TwoParam, OutcomeKind::Binary) => &["epsilon0", "epsilon1"],
        (FluctuationForm::TwoParam, OutcomeKind::Continuous) => &["epsilon0", "epsilon1", "sigma_xi"],
    };
    let fluct = sample_blocks(&model, &config.stage(STAGE_SS), "fluctuation", Keep::Only(keep))?;
    assemble(
        dataset,
        config,
        Assembled {
            method: BayesMethod::BTmleSS,
            form,
            draws: initial.draws.clone().merge(fluct)?,
            outcome_meta: &initial.outcome_meta,
            propensity_meta: &initial.propensity_meta,
            scale: initial.scale,
            fluctuation_rows: y.len(),
            warnings,
        },
    )
}

/// B-TMLE-M with a one-parameter fluctuation.
pub fn fit_btmle_m(dataset: &Dataset, specs: &TmleSpecs, config: &BayesConfig) -> Result<BayesTmleResult> {
    let initial = fit_initial(dataset, specs, config)?;
    fit_btmle_m_from(&initial, dataset, FluctuationForm::OneParam, config)
}

/// B-TMLE-SS with a one-parameter fluctuation.
pub fn fit_btmle_ss(dataset: &Dataset, specs: &TmleSpecs, config: &BayesConfig) -> Result<BayesTmleResult> {
    let initial = fit_initial(dataset, specs, config)?;
    fit_btmle_ss_from(&initial, dataset, FluctuationForm::OneParam, config)
}

/// BN-TMLE: outcome, propensity and fluctuation parameters sampled jointly.
pub fn fit_bn_tmle(
    dataset: &Dataset,
    specs: &TmleSpecs,
    config: &BayesConfig,
    form: FluctuationForm,
) -> Result<BayesTmleResult> {
    specs.validate()?;
    config.validate()?;
    dataset.require_both_arms()?;
    let (y, scale) = dataset.fitting_outcome()?;
    let xo = build_design(dataset, &specs.outcome)?;
    let xa = build_design(dataset, &specs.propensity)?;
    let priors = Priors {
        theta_y: specs.outcome.prior_scale,
        theta_a: specs.propensity.prior_scale,
        epsilon: config.epsilon_prior_scale,
        sigma: specs.outcome.error_sd_prior_scale,
    };
    let model = BnDensity::new(
        &xo.values,
        &xa.values,
        dataset.treatment(),
        &y,
        dataset.outcome_kind(),
        form,
        config.options,
        priors,
    );
    let draws = sample_blocks(&model, &config.stage(STAGE_NETWORK), "network", Keep::All)?;
    let method = match form {
        FluctuationForm::OneParam => BayesMethod::BnTmle1p,
        FluctuationForm::TwoParam => BayesMethod::BnTmle2p,
    };
    assemble(
        dataset,
        config,
        Assembled {
            method,
            form,
            draws,
            outcome_meta: &xo.meta,
            propensity_meta: &xa.meta,
            scale,
            fluctuation_rows: dataset.n_rows(),
            warnings: Vec::new(),
        },
    )
}

/// Fit any of the Bayesian estimators.
pub fn fit_bayes(method: BayesMethod, dataset: &Dataset, specs: &TmleSpecs, config: &BayesConfig) -> Result<BayesTmleResult> {
    match method {
        BayesMethod::BTmleM => fit_btmle_m(dataset, specs, config),
        BayesMethod::BTmleSS => fit_btmle_ss(dataset, specs, config),
        BayesMethod::BnTmle1p => fit_bn_tmle(dataset, specs, config, FluctuationForm::OneParam),
        BayesMethod::BnTmle2p => fit_bn_tmle(dataset, specs, config, FluctuationForm::TwoParam),
    }
}

/// Targeted predictions of a fitted result under `do(A=a)`, `d × m`, with
/// no further inference. Binary values are probabilities, continuous values
/// are on the original outcome scale.
pub fn do_predict(result: &BayesTmleResult, dataset: &Dataset, a: u8) -> Result<PredictionMatrix> {
    let xo1 = encode_dataset(dataset, &result.outcome_meta, Some(1))?;
    let xo0 = encode_dataset(dataset, &result.outcome_meta, Some(0))?;
    let xa = encode_dataset(dataset, &result.propensity_meta, None)?;
    let eps = epsilon_draws(&result.draws, result.form)?;
    let predictor = Predictor::new(&result.draws, &xa, xo1.cols(), result.outcome_kind, result.scale, result.options)?;
    let t = predictor.targeted(&xo1, &xo0, result.form, &eps, true)?;
    let (m1, m0) = t.matrices.ok_or_else(|| Error::Shape("prediction matrices were not produced".into()))?;
    Ok(if a == 1 { m1 } else { m0 })
}
