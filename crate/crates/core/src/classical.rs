//! Frequentist TMLE: maximum-likelihood outcome and propensity fits, a single
//! fluctuation step along the clever covariate, and an influence-curve
//! standard error.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{build_design, encode_dataset, Dataset, EncodingMeta, OutcomeKind, OutcomeScale, TmleSpecs};
use crate::glm::{fit_mle, offset_glm_fit, GlmKind};
use crate::linalg::{dot, Matrix};
use crate::math::{clamp_prob, expit, logit, sqrt, PROB_CEIL};
use crate::{stats, Error, Result};

/// One fluctuation parameter on `H`, or separate parameters on `H0` and `H1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FluctuationForm {
    OneParam,
    TwoParam,
}

impl FluctuationForm {
    pub fn n_params(self) -> usize {
        match self {
            FluctuationForm::OneParam => 1,
            FluctuationForm::TwoParam => 2,
        }
    }
}

/// Estimation options shared by the classical and Bayesian estimators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TmleOptions {
    /// Clip propensity scores into `[lo, hi]` before forming `H`.
    pub propensity_clip: Option<(f64, f64)>,
}

impl TmleOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.propensity_clip {
            if !(0.0 < lo && lo < hi && hi < 1.0) {
                return Err(Error::InvalidConfig("propensity clip must satisfy 0 < lo < hi < 1".into()));
            }
        }
        Ok(())
    }

    /// Clamp (and optionally clip) a propensity score. The flag reports
    /// whether the numerical guard was needed.
    #[inline]
    pub fn guard_propensity(&self, p: f64) -> (f64, bool) {
        let (p, flagged) = clamp_prob(p);
        match self.propensity_clip {
            Some((lo, hi)) => (p.clamp(lo, hi), flagged),
            None => (p, flagged),
        }
    }
}

/// `I(a=1)/p − I(a=0)/(1−p)`, with `p` clamped away from 0 and 1. The flag
/// is set when clamping was needed.
pub fn clever_covariate(a: u8, propensity: f64) -> (f64, bool) {
    let (p, flagged) = clamp_prob(propensity);
    (if a == 1 { 1.0 / p } else { -1.0 / (1.0 - p) }, flagged)
}

/// `(H0, H1) = (I(a=0)/(1−p), I(a=1)/p)`, clamped as in [`clever_covariate`].
pub fn clever_covariate_two(a: u8, propensity: f64) -> ((f64, f64), bool) {
    let (p, flagged) = clamp_prob(propensity);
    let pair = if a == 1 { (0.0, 1.0 / p) } else { (1.0 / (1.0 - p), 0.0) };
    (pair, flagged)
}

/// Largest admissible magnitude of a logit, matching the probability clamp.
pub fn logit_bound() -> f64 {
    logit(PROB_CEIL)
}

/// Clamp a linear predictor as if its probability had been clamped.
#[inline]
pub fn clamp_logit(eta: f64) -> f64 {
    let b = logit_bound();
    eta.clamp(-b, b)
}

/// Shift of the fluctuation for a unit with treatment `a` and propensity
/// `p` (already guarded).
#[inline]
pub fn fluctuation_shift(form: FluctuationForm, eps: &[f64], a: u8, p: f64) -> f64 {
    match form {
        FluctuationForm::OneParam => eps[0] * if a == 1 { 1.0 / p } else { -1.0 / (1.0 - p) },
        FluctuationForm::TwoParam => {
            if a == 1 {
                eps[1] / p
            } else {
                eps[0] / (1.0 - p)
            }
        }
    }
}

/// Targeted outcome from an initial linear predictor (logit scale for
/// binary outcomes, fitting scale for continuous) and a fluctuation shift.
#[inline]
pub fn targeted_value(kind: OutcomeKind, init: f64, shift: f64) -> f64 {
    match kind {
        OutcomeKind::Binary => expit(clamp_logit(init) + shift),
        OutcomeKind::Continuous => init + shift,
    }
}

/// Initial outcome prediction on the probability (binary) or fitting
/// (continuous) scale.
#[inline]
pub fn initial_value(kind: OutcomeKind, init: f64) -> f64 {
    match kind {
        OutcomeKind::Binary => expit(init),
        OutcomeKind::Continuous => init,
    }
}

/// A fitted classical TMLE.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTmleFit {
    pub theta_y: Vec<f64>,
    pub theta_a: Vec<f64>,
    /// `[ε]` for one parameter, `[ε0, ε1]` for two.
    pub epsilon: Vec<f64>,
    pub fluctuation_form: FluctuationForm,
    /// On the original outcome scale.
    pub ate: f64,
    pub se: f64,
    pub ci95: (f64, f64),
    /// Influence-curve values on the original outcome scale.
    pub influence_values: Vec<f64>,
    pub outcome_kind: OutcomeKind,
    pub outcome_scale: OutcomeScale,
    pub outcome_meta: EncodingMeta,
    pub propensity_meta: EncodingMeta,
    pub options: TmleOptions,
    /// Sum of `H_i (Y_i − Y_f,i)` on the fitting scale.
    pub targeting_score: f64,
    pub clamped: usize,
    pub warnings: Vec<String>,
}

/// z-quantile used for the Wald interval.
pub const Z_95: f64 = 1.96;

pub fn fit_classical(dataset: &Dataset, specs: &TmleSpecs, form: FluctuationForm) -> Result<ClassicalTmleFit> {
    fit_classical_with(dataset, specs, form, &TmleOptions::default())
}

pub fn fit_classical_with(
    dataset: &Dataset,
    specs: &TmleSpecs,
    form: FluctuationForm,
    options: &TmleOptions,
) -> Result<ClassicalTmleFit> {
    specs.validate()?;
    options.validate()?;
    dataset.require_both_arms()?;
    let kind = dataset.outcome_kind();
    let (y, scale) = dataset.fitting_outcome()?;
    let a_obs = dataset.treatment();
    let d = dataset.n_rows();
    let mut warnings = Vec::new();

    let xo = build_design(dataset, &specs.outcome)?;
    let xa = build_design(dataset, &specs.propensity)?;
    let glm = match kind {
        OutcomeKind::Binary => GlmKind::Logistic,
        OutcomeKind::Continuous => GlmKind::Linear,
    };
    let out_fit = fit_mle(glm, &xo.values, &y)?;
    let a_f64: Vec<f64> = a_obs.iter().map(|&a| f64::from(a)).collect();
    let prop_fit = fit_mle(GlmKind::Logistic, &xa.values, &a_f64)?;
    for (name, f) in [("outcome", &out_fit), ("propensity", &prop_fit)] {
        if f.separation {
            warnings.push(format!("{name} model: possible separation"));
        }
        if !f.converged && !f.separation {
            warnings.push(format!("{name} model: MLE did not reach tolerance"));
        }
    }

    let mut clamped = 0;
    let p: Vec<f64> = (0..d)
        .map(|i| {
            let (p, c) = options.guard_propensity(expit(dot(xa.values.row(i), &prop_fit.theta)));
            clamped += usize::from(c);
            p
        })
        .collect();

    let xo1 = xo.with_treatment(1)?;
    let xo0 = xo.with_treatment(0)?;
    let eta_obs = xo.values.mul_vec(&out_fit.theta);
    let eta1 = xo1.values.mul_vec(&out_fit.theta);
    let eta0 = xo0.values.mul_vec(&out_fit.theta);

    let offset: Vec<f64> = match kind {
        OutcomeKind::Binary => eta_obs.iter().map(|&e| clamp_logit(e)).collect(),
        OutcomeKind::Continuous => eta_obs.clone(),
    };
    let covariates = match form {
        FluctuationForm::OneParam => {
            Matrix::column_vector(&(0..d).map(|i| fluctuation_shift(form, &[1.0], a_obs[i], p[i])).collect::<Vec<_>>())
        }
        FluctuationForm::TwoParam => {
            let mut m = Matrix::zeros(d, 2);
            for i in 0..d {
                m.set(i, 0, fluctuation_shift(form, &[1.0, 0.0], a_obs[i], p[i]));
                m.set(i, 1, fluctuation_shift(form, &[0.0, 1.0], a_obs[i], p[i]));
            }
            m
        }
    };
    let epsilon = offset_glm_fit(glm, &offset, &covariates, &y)?;

    let mut yf1 = vec![0.0; d];
    let mut yf0 = vec![0.0; d];
    let mut yf_obs = vec![0.0; d];
    for i in 0..d {
        yf1[i] = targeted_value(kind, eta1[i], fluctuation_shift(form, &epsilon, 1, p[i]));
        yf0[i] = targeted_value(kind, eta0[i], fluctuation_shift(form, &epsilon, 0, p[i]));
        yf_obs[i] = targeted_value(kind, eta_obs[i], fluctuation_shift(form, &epsilon, a_obs[i], p[i]));
    }
    let diffs: Vec<f64> = yf1.iter().zip(&yf0).map(|(a, b)| a - b).collect();
    let ate_fit = stats::mean(&diffs);
    let mut score = 0.0;
    let ic: Vec<f64> = (0..d)
        .map(|i| {
            let h = fluctuation_shift(FluctuationForm::OneParam, &[1.0], a_obs[i], p[i]);
            let resid = h * (y[i] - yf_obs[i]);
            score += resid;
            resid + diffs[i] - ate_fit
        })
        .collect();
    let se_fit = stats::sd(&ic) / sqrt(d as f64);
    if !ate_fit.is_finite() || !se_fit.is_finite() {
        return Err(Error::NonFinite("ATE or its standard error".into()));
    }
    let ate = ate_fit * scale.scale;
    let se = se_fit * scale.scale;
    if clamped > 0 {
        warnings.push(format!("{clamped} propensity scores clamped"));
    }
    Ok(ClassicalTmleFit {
        theta_y: out_fit.theta,
        theta_a: prop_fit.theta,
        epsilon,
        fluctuation_form: form,
        ate,
        se,
        ci95: (ate - Z_95 * se, ate + Z_95 * se),
        influence_values: ic.iter().map(|v| v * scale.scale).collect(),
        outcome_kind: kind,
        outcome_scale: scale,
        outcome_meta: xo.meta,
        propensity_meta: xa.meta,
        options: *options,
        targeting_score: score,
        clamped,
        warnings,
    })
}

/// Targeted predictions with the treatment set to `a` for every row, on the
/// original outcome scale (probabilities for binary outcomes).
pub fn targeted_predict(fit: &ClassicalTmleFit, dataset: &Dataset, a: u8) -> Result<Vec<f64>> {
    let xo = encode_dataset(dataset, &fit.outcome_meta, Some(a))?;
    let xa = encode_dataset(dataset, &fit.propensity_meta, None)?;
    Ok((0..dataset.n_rows())
        .map(|i| {
            let (p, _) = fit.options.guard_propensity(expit(dot(xa.values.row(i), &fit.theta_a)));
            let eta = dot(xo.values.row(i), &fit.theta_y);
            let v = targeted_value(fit.outcome_kind, eta, fluctuation_shift(fit.fluctuation_form, &fit.epsilon, a, p));
            match fit.outcome_kind {
                OutcomeKind::Binary => v,
                OutcomeKind::Continuous => fit.outcome_scale.restore(v),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnValues, Confounder};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn clever_covariate_values() {
        assert_eq!(clever_covariate(1, 0.5).0, 2.0);
        assert_eq!(clever_covariate(0, 0.5).0, -2.0);
        assert_eq!(clever_covariate(1, 0.2).0, 5.0);
        assert_eq!(clever_covariate_two(1, 0.25).0, (0.0, 4.0));
        let (h, _) = clever_covariate_two(0, 0.25);
        assert!((h.0 - 4.0 / 3.0).abs() < 1e-15 && h.1 == 0.0);
        assert!(clever_covariate(1, 0.0).1);
    }

    proptest! {
        #[test]
        fn one_param_is_difference_of_two(a in 0u8..2, p in 1e-6f64..(1.0 - 1e-6)) {
            let (h, _) = clever_covariate(a, p);
            let ((h0, h1), _) = clever_covariate_two(a, p);
            prop_assert!((h - (h1 - h0)).abs() <= 1e-12 * h.abs().max(1.0));
        }

        #[test]
        fn two_param_with_opposite_eps_matches_one_param(
            a in 0u8..2, p in 1e-3f64..0.999, e in -1.0f64..1.0, eta in -3.0f64..3.0
        ) {
            let one = targeted_value(OutcomeKind::Binary, eta, fluctuation_shift(FluctuationForm::OneParam, &[e], a, p));
            let two = targeted_value(OutcomeKind::Binary, eta, fluctuation_shift(FluctuationForm::TwoParam, &[-e, e], a, p));
            prop_assert!((one - two).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_targeted_value() {
        // Y_init = 0.5, ε = 0.1, H = 2
        let v = targeted_value(OutcomeKind::Binary, 0.0, 0.1 * 2.0);
        assert!((v - 0.549_833_997_312_478).abs() < 1e-12);
        assert_eq!(targeted_value(OutcomeKind::Binary, 0.3, 0.0), expit(0.3));
    }

    fn rct(n: usize, seed: u64) -> Dataset {
        let mut rng = stream_rng(seed, 0);
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| f64::from(u8::from(rng.random_bool(expit(-0.3 + 0.8 * x[i] + 0.4 * f64::from(a[i]))))))
            .collect();
        Dataset::new(vec![Confounder::new("x", ColumnValues::Continuous(x))], a, y, OutcomeKind::Binary).unwrap()
    }

    #[test]
    fn randomized_data_matches_difference_in_means() {
        let d = rct(20_000, 1);
        let fit = fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::OneParam).unwrap();
        let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
        for (a, y) in d.treatment().iter().zip(d.outcome()) {
            if *a == 1 {
                s1 += y;
                n1 += 1.0;
            } else {
                s0 += y;
                n0 += 1.0;
            }
        }
        let dim = s1 / n1 - s0 / n0;
        assert!((fit.ate - dim).abs() < 2.0 * fit.se, "{} vs {dim}", fit.ate);
        assert!(fit.targeting_score.abs() < 1e-6);
        assert!(stats::mean(&fit.influence_values).abs() < 1e-8);
        assert!((fit.ci95.0 - (fit.ate - 1.96 * fit.se)).abs() < 1e-15);
    }

    #[test]
    fn two_param_agrees_with_one_param() {
        let d = rct(3000, 2);
        let one = fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::OneParam).unwrap();
        let two = fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::TwoParam).unwrap();
        assert!((one.ate - two.ate).abs() < 1e-3);
        assert_eq!(two.epsilon.len(), 2);
    }

    #[test]
    fn targeted_predict_at_zero_eps_is_initial_model() {
        let d = rct(500, 3);
        let mut fit = fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::OneParam).unwrap();
        fit.epsilon = vec![0.0];
        let pred = targeted_predict(&fit, &d, 1).unwrap();
        let xo = encode_dataset(&d, &fit.outcome_meta, Some(1)).unwrap();
        for (i, v) in pred.iter().enumerate() {
            assert!((v - expit(dot(xo.values.row(i), &fit.theta_y))).abs() < 1e-15);
        }
    }

    #[test]
    fn single_arm_is_rejected() {
        let d = Dataset::new(
            vec![Confounder::new("x", ColumnValues::Continuous(vec![0.0, 1.0, 2.0]))],
            vec![1, 1, 1],
            vec![0.0, 1.0, 1.0],
            OutcomeKind::Binary,
        )
        .unwrap();
        assert_eq!(
            fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::OneParam).unwrap_err(),
            Error::SingleArm
        );
    }
}
