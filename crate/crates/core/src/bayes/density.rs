//! Joint log densities for the network estimator and the latent-input
//! fluctuation model.

use alloc::vec::Vec;

use crate::classical::{logit_bound, FluctuationForm, TmleOptions};
use crate::data::OutcomeKind;
use crate::glm::{BlockLayout, LogDensity, Transform};
use crate::linalg::{axpy, dot, Matrix};
use crate::math::{bernoulli_logit_parts, exp, half_normal_logpdf, normal_logpdf, LN_2PI, PROB_CEIL, PROB_FLOOR};

/// Prior scales of a joint model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    pub theta_y: f64,
    pub theta_a: f64,
    pub epsilon: f64,
    pub sigma: f64,
}

fn gaussian_prior(theta: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
    let s2 = scale * scale;
    let mut lp = 0.0;
    for (g, &t) in grad.iter_mut().zip(theta) {
        *g = -t / s2;
        lp += normal_logpdf(t, 0.0, scale);
    }
    lp
}

/// Log prior plus log-Jacobian of a half-normal scale sampled as `u = ln σ`,
/// with its derivative in `u`.
fn log_scale_prior(u: f64, scale: f64) -> (f64, f64) {
    let sigma = exp(u);
    (half_normal_logpdf(sigma, scale) + u, 1.0 - sigma * sigma / (scale * scale))
}

/// Propensity `raw = expit(η)` with the probability guard applied, plus
/// `dp/dη` (zero where the guard is active).
#[inline]
fn guarded_propensity(options: &TmleOptions, raw: f64) -> (f64, f64) {
    let (lo, hi) = match options.propensity_clip {
        Some((lo, hi)) => (lo.max(PROB_FLOOR), hi.min(PROB_CEIL)),
        None => (PROB_FLOOR, PROB_CEIL),
    };
    if raw < lo {
        (lo, 0.0)
    } else if raw > hi {
        (hi, 0.0)
    } else {
        (raw, raw * (1.0 - raw))
    }
}

/// Fluctuation shift for treatment `a` and its derivatives with respect to
/// the propensity and the fluctuation parameters.
#[inline]
fn shift_parts(form: FluctuationForm, eps: &[f64], a: u8, p: f64) -> (f64, f64, [f64; 2]) {
    match (form, a) {
        (FluctuationForm::OneParam, 1) => (eps[0] / p, -eps[0] / (p * p), [1.0 / p, 0.0]),
        (FluctuationForm::OneParam, _) => {
            let q = 1.0 - p;
            (-eps[0] / q, -eps[0] / (q * q), [-1.0 / q, 0.0])
        }
        (FluctuationForm::TwoParam, 1) => (eps[1] / p, -eps[1] / (p * p), [0.0, 1.0 / p]),
        (FluctuationForm::TwoParam, _) => {
            let q = 1.0 - p;
            (eps[0] / q, eps[0] / (q * q), [1.0 / q, 0.0])
        }
    }
}

/// Joint outcome, propensity and fluctuation model. Each unit contributes a
/// treatment factor, an outcome factor at the initial prediction and an
/// outcome factor at the targeted prediction.
pub struct BnDensity<'a> {
    xy: &'a Matrix,
    xa: &'a Matrix,
    a: &'a [u8],
    y: &'a [f64],
    kind: OutcomeKind,
    form: FluctuationForm,
    options: TmleOptions,
    priors: Priors,
    layout: BlockLayout,
    qy: usize,
    qa: usize,
    k: usize,
}

impl<'a> BnDensity<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        xy: &'a Matrix,
        xa: &'a Matrix,
        a: &'a [u8],
        y: &'a [f64],
        kind: OutcomeKind,
        form: FluctuationForm,
        options: TmleOptions,
        priors: Priors,
    ) -> Self {
        let mut layout = BlockLayout::new();
        layout.push("theta_Y", xy.cols(), Transform::Identity);
        layout.push("theta_A", xa.cols(), Transform::Identity);
        match form {
            FluctuationForm::OneParam => {
                layout.push("epsilon", 1, Transform::Identity);
            }
            FluctuationForm::TwoParam => {
                layout.push("epsilon0", 1, Transform::Identity);
                layout.push("epsilon1", 1, Transform::Identity);
            }
        }
        if kind == OutcomeKind::Continuous {
            layout.push("sigma_o", 1, Transform::Log);
            layout.push("sigma_f", 1, Transform::Log);
        }
        Self { xy, xa, a, y, kind, form, options, priors, layout, qy: xy.cols(), qa: xa.cols(), k: form.n_params() }
    }
}

impl LogDensity for BnDensity<'_> {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let (qy, qa, k) = (self.qy, self.qa, self.k);
        let (theta_y, rest) = params.split_at(qy);
        let (theta_a, rest) = rest.split_at(qa);
        let eps = &rest[..k];
        let (g_y, g_rest) = grad.split_at_mut(qy);
        let (g_a, g_rest) = g_rest.split_at_mut(qa);

        let mut lp = gaussian_prior(theta_y, self.priors.theta_y, g_y);
        lp += gaussian_prior(theta_a, self.priors.theta_a, g_a);
        let mut g_eps = [0.0; 2];
        {
            let mut tmp = [0.0; 2];
            lp += gaussian_prior(eps, self.priors.epsilon, &mut tmp[..k]);
            g_eps[..k].copy_from_slice(&tmp[..k]);
        }

        let (sig_o, sig_f) = if self.kind == OutcomeKind::Continuous {
            (exp(rest[k]), exp(rest[k + 1]))
        } else {
            (1.0, 1.0)
        };
        let (mut ss_o, mut ss_f) = (0.0, 0.0);
        let bound = logit_bound();
        let (inv_vo, inv_vf) = (1.0 / (sig_o * sig_o), 1.0 / (sig_f * sig_f));

        for i in 0..self.y.len() {
            let xy = self.xy.row(i);
            let xa = self.xa.row(i);
            let a = self.a[i];
            let y = self.y[i];
            let eta_y = dot(xy, theta_y);
            let eta_a = dot(xa, theta_a);

            let (lp_a, r_a) = bernoulli_logit_parts(f64::from(a), eta_a);
            lp += lp_a;
            let (p, dp) = guarded_propensity(&self.options, f64::from(a) - r_a);
            let (shift, dshift_dp, dshift_deps) = shift_parts(self.form, eps, a, p);

            let (coef_y, r_f) = match self.kind {
                OutcomeKind::Binary => {
                    let (lp_o, r_o) = bernoulli_logit_parts(y, eta_y);
                    let inside = eta_y.abs() <= bound;
                    let base = if inside { eta_y } else { eta_y.clamp(-bound, bound) };
                    let (lp_f, r_f) = bernoulli_logit_parts(y, base + shift);
                    lp += lp_o + lp_f;
                    (r_o + if inside { r_f } else { 0.0 }, r_f)
                }
                OutcomeKind::Continuous => {
                    let e_o = y - eta_y;
                    let e_f = e_o - shift;
                    ss_o += e_o * e_o;
                    ss_f += e_f * e_f;
                    let r_o = e_o * inv_vo;
                    let r_f = e_f * inv_vf;
                    (r_o + r_f, r_f)
                }
            };
            axpy(coef_y, xy, g_y);
            axpy(r_a + r_f * dshift_dp * dp, xa, g_a);
            g_eps[0] += r_f * dshift_deps[0];
            g_eps[1] += r_f * dshift_deps[1];
        }

        let g_tail = g_rest;
        g_tail[..k].copy_from_slice(&g_eps[..k]);
        if self.kind == OutcomeKind::Continuous {
            let n = self.y.len() as f64;
            let (u_o, u_f) = (rest[k], rest[k + 1]);
            lp += -n * LN_2PI - n * (u_o + u_f) - 0.5 * ss_o * inv_vo - 0.5 * ss_f * inv_vf;
            let (pl_o, pg_o) = log_scale_prior(u_o, self.priors.sigma);
            let (pl_f, pg_f) = log_scale_prior(u_f, self.priors.sigma);
            lp += pl_o + pl_f;
            g_tail[k] = -n + ss_o * inv_vo + pg_o;
            g_tail[k + 1] = -n + ss_f * inv_vf + pg_f;
        }
        lp
    }
}

/// Per-unit summaries of the initial predictions and clever covariates
/// across posterior draws, used as Normal priors on latent inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub mu_yinit: Vec<f64>,
    pub sd_yinit: Vec<f64>,
    pub mu_h: Vec<f64>,
    pub sd_h: Vec<f64>,
}

/// Floor applied to the summary standard deviations.
pub const SUMMARY_SD_FLOOR: f64 = 1e-6;

/// Fluctuation model with latent initial predictions and clever covariates.
/// Latents use a non-centred parametrisation: `ℓ_i = μ_i + s_i z_i`.
pub struct SsDensity<'a> {
    stats: &'a SummaryStats,
    a: &'a [u8],
    y: &'a [f64],
    kind: OutcomeKind,
    form: FluctuationForm,
    priors: Priors,
    layout: BlockLayout,
    k: usize,
}

impl<'a> SsDensity<'a> {
    pub fn new(
        stats: &'a SummaryStats,
        a: &'a [u8],
        y: &'a [f64],
        kind: OutcomeKind,
        form: FluctuationForm,
        priors: Priors,
    ) -> Self {
        let mut layout = BlockLayout::new();
        match form {
            FluctuationForm::OneParam => {
                layout.push("epsilon", 1, Transform::Identity);
            }
            FluctuationForm::TwoParam => {
                layout.push("epsilon0", 1, Transform::Identity);
                layout.push("epsilon1", 1, Transform::Identity);
            }
        }
        if kind == OutcomeKind::Continuous {
            layout.push("sigma_xi", 1, Transform::Log);
        }
        layout.push("z_yinit", y.len(), Transform::Identity);
        layout.push("z_h", y.len(), Transform::Identity);
        Self { stats, a, y, kind, form, priors, layout, k: form.n_params() }
    }

    /// Multiplier of the latent clever covariate in the targeted predictor,
    /// and the index of the fluctuation parameter it comes from.
    #[inline]
    fn coefficient(&self, eps: &[f64], a: u8) -> (f64, usize, f64) {
        match (self.form, a) {
            (FluctuationForm::OneParam, _) => (eps[0], 0, 1.0),
            (FluctuationForm::TwoParam, 1) => (eps[1], 1, 1.0),
            (FluctuationForm::TwoParam, _) => (-eps[0], 0, -1.0),
        }
    }
}

impl LogDensity for SsDensity<'_> {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.y.len();
        let k = self.k;
        let has_sigma = self.kind == OutcomeKind::Continuous;
        let head = k + usize::from(has_sigma);
        let eps = &params[..k];
        let zl = &params[head..head + d];
        let zh = &params[head + d..head + 2 * d];

        let mut lp = 0.0;
        {
            let mut tmp = [0.0; 2];
            lp += gaussian_prior(eps, self.priors.epsilon, &mut tmp[..k]);
            grad[..k].copy_from_slice(&tmp[..k]);
        }
        let sigma = if has_sigma { exp(params[k]) } else { 1.0 };
        let inv_v = 1.0 / (sigma * sigma);
        let mut ss = 0.0;
        for i in 0..d {
            let (zl_i, zh_i) = (zl[i], zh[i]);
            lp -= 0.5 * (zl_i * zl_i + zh_i * zh_i) + LN_2PI;
            let (sl, sh) = (self.stats.sd_yinit[i], self.stats.sd_h[i]);
            let l = self.stats.mu_yinit[i] + sl * zl_i;
            let h = self.stats.mu_h[i] + sh * zh_i;
            let (c, idx, sign) = self.coefficient(eps, self.a[i]);
            let kappa = l + c * h;
            let r = match self.kind {
                OutcomeKind::Binary => {
                    let (lp_y, r) = bernoulli_logit_parts(self.y[i], kappa);
                    lp += lp_y;
                    r
                }
                OutcomeKind::Continuous => {
                    let e = self.y[i] - kappa;
                    ss += e * e;
                    e * inv_v
                }
            };
            grad[head + i] = r * sl - zl_i;
            grad[head + d + i] = r * c * sh - zh_i;
            grad[idx] += r * sign * h;
        }
        if has_sigma {
            let n = d as f64;
            let u = params[k];
            lp += -0.5 * n * LN_2PI - n * u - 0.5 * ss * inv_v;
            let (pl, pg) = log_scale_prior(u, self.priors.sigma);
            lp += pl;
            grad[k] = -n + ss * inv_v + pg;
        }
        lp
    }
}
