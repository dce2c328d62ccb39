//! Log densities with analytic gradients for the logistic and linear GLMs,
//! plus maximum-likelihood fitting.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, cholesky, cholesky_solve, dot, inf_norm, Matrix, Qr};
use crate::math::{bernoulli_logit_logpmf, exp, expit, half_normal_logpdf, ln, normal_logpdf, sqrt};
use crate::{Error, Result};

/// How a block's unconstrained coordinates map to its natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Transform {
    Identity,
    /// The sampler works on `log x`; draws are reported as `x`.
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSpec {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub transform: Transform,
}

/// Names and extents of the parameter blocks of a density.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockLayout {
    blocks: Vec<BlockSpec>,
}

impl BlockLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a block and return its offset.
    pub fn push(&mut self, name: &str, len: usize, transform: Transform) -> usize {
        let offset = self.dim();
        self.blocks.push(BlockSpec { name: name.into(), offset, len, transform });
        offset
    }

    pub fn dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len)
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn find(&self, name: &str) -> Option<&BlockSpec> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Map an unconstrained vector to natural-scale values.
    pub fn to_natural(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        for b in &self.blocks {
            if b.transform == Transform::Log {
                for v in &mut out[b.offset..b.offset + b.len] {
                    *v = exp(*v);
                }
            }
        }
        out
    }
}

/// An unnormalized log posterior over an unconstrained parameter vector.
///
/// Implementations are pure, so one model may be evaluated from several
/// threads at once.
pub trait LogDensity: Send + Sync {
    fn layout(&self) -> &BlockLayout;

    /// Log density at `theta`; the gradient is written into `grad`.
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.log_density_grad(theta, &mut g)
    }
}

/// Largest relative discrepancy between the analytic gradient and a central
/// finite difference with step `1e-5 · max(1, |θ_k|)`. The discrepancy of a
/// coordinate is `|g − fd| / max(1, |g|, |fd|)`.
pub fn gradient_check<M: LogDensity + ?Sized>(model: &M, theta: &[f64]) -> f64 {
    let mut g = vec![0.0; model.dim()];
    model.log_density_grad(theta, &mut g);
    let mut worst = 0.0f64;
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        probe[k] = theta[k] + h;
        let up = model.log_density(&probe);
        probe[k] = theta[k] - h;
        let down = model.log_density(&probe);
        probe[k] = theta[k];
        let fd = (up - down) / (2.0 * h);
        let err = (g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1.0);
        worst = worst.max(err);
    }
    worst
}

fn check_rows(x: &Matrix, n: usize, what: &str) -> Result<()> {
    if x.rows() != n {
        return Err(Error::Shape(format!("design has {} rows but {what} has {n}", x.rows())));
    }
    Ok(())
}

fn check_scale(s: f64, what: &str) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidConfig(format!("{what} must be positive")));
    }
    Ok(())
}

/// Bayesian logistic regression with a Gaussian coefficient prior and an
/// optional fixed offset on the logit scale.
#[derive(Debug, Clone)]
pub struct LogisticDensity<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    offset: Option<&'a [f64]>,
    prior_scale: f64,
    layout: BlockLayout,
}

impl<'a> LogisticDensity<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], prior_scale: f64, block: &str) -> Result<Self> {
        check_rows(x, y.len(), "y")?;
        check_scale(prior_scale, "prior_scale")?;
        let mut layout = BlockLayout::new();
        layout.push(block, x.cols(), Transform::Identity);
        Ok(Self { x, y, offset: None, prior_scale, layout })
    }

    pub fn with_offset(mut self, offset: &'a [f64]) -> Result<Self> {
        check_rows(self.x, offset.len(), "offset")?;
        if offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::NonFinite("offset".into()));
        }
        self.offset = Some(offset);
        Ok(self)
    }
}

impl LogDensity for LogisticDensity<'_> {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let s2 = self.prior_scale * self.prior_scale;
        let mut lp = 0.0;
        for (g, &t) in grad.iter_mut().zip(theta) {
            *g = -t / s2;
            lp += normal_logpdf(t, 0.0, self.prior_scale);
        }
        for i in 0..self.x.rows() {
            let row = self.x.row(i);
            let eta = dot(row, theta) + self.offset.map_or(0.0, |o| o[i]);
            let y = self.y[i];
            lp += bernoulli_logit_logpmf(y, eta);
            axpy(y - expit(eta), row, grad);
        }
        lp
    }
}

/// Bayesian linear regression over `(θ, log σ)` with a Gaussian coefficient
/// prior and a half-normal prior on `σ`.
#[derive(Debug, Clone)]
pub struct LinearDensity<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    offset: Option<&'a [f64]>,
    prior_scale: f64,
    sd_prior_scale: f64,
    layout: BlockLayout,
}

impl<'a> LinearDensity<'a> {
    pub fn new(
        x: &'a Matrix,
        y: &'a [f64],
        prior_scale: f64,
        sd_prior_scale: f64,
        block: &str,
        sd_block: &str,
    ) -> Result<Self> {
        check_rows(x, y.len(), "y")?;
        check_scale(prior_scale, "prior_scale")?;
        check_scale(sd_prior_scale, "error_sd_prior_scale")?;
        let mut layout = BlockLayout::new();
        layout.push(block, x.cols(), Transform::Identity);
        layout.push(sd_block, 1, Transform::Log);
        Ok(Self { x, y, offset: None, prior_scale, sd_prior_scale, layout })
    }

    pub fn with_offset(mut self, offset: &'a [f64]) -> Result<Self> {
        check_rows(self.x, offset.len(), "offset")?;
        if offset.iter().any(|o| !o.is_finite()) {
            return Err(Error::NonFinite("offset".into()));
        }
        self.offset = Some(offset);
        Ok(self)
    }
}

impl LogDensity for LinearDensity<'_> {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let q = self.x.cols();
        let (theta, log_sigma) = (&params[..q], params[q]);
        let sigma = exp(log_sigma);
        let inv_var = 1.0 / (sigma * sigma);
        let s2 = self.prior_scale * self.prior_scale;
        let mut lp = 0.0;
        for (g, &t) in grad[..q].iter_mut().zip(theta) {
            *g = -t / s2;
            lp += normal_logpdf(t, 0.0, self.prior_scale);
        }
        let mut ss = 0.0;
        for i in 0..self.x.rows() {
            let row = self.x.row(i);
            let r = self.y[i] - dot(row, theta) - self.offset.map_or(0.0, |o| o[i]);
            ss += r * r;
            axpy(r * inv_var, row, &mut grad[..q]);
        }
        let n = self.x.rows() as f64;
        lp += -0.5 * n * crate::math::LN_2PI - n * log_sigma - 0.5 * ss * inv_var;
        lp += half_normal_logpdf(sigma, self.sd_prior_scale) + log_sigma;
        grad[q] = -n + ss * inv_var - sigma * sigma / (self.sd_prior_scale * self.sd_prior_scale) + 1.0;
        lp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GlmKind {
    Logistic,
    Linear,
}

/// Result of an unpenalized maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: Vec<f64>,
    /// Residual sd with denominator `d` (linear fits only).
    pub sigma: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when a logistic coefficient exceeded 30 in magnitude.
    pub separation: bool,
}

const MLE_TOL: f64 = 1e-8;
const MLE_MAX_ITER: usize = 100;
const SEPARATION_BOUND: f64 = 30.0;

/// Maximum-likelihood fit of a logistic or linear GLM. The design must have
/// full column rank.
pub fn fit_mle(kind: GlmKind, x: &Matrix, y: &[f64]) -> Result<MleFit> {
    check_rows(x, y.len(), "y")?;
    let qr = Qr::new(x);
    match kind {
        GlmKind::Linear => {
            let theta = qr.solve_least_squares(y)?;
            let fitted = x.mul_vec(&theta);
            let ss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
            let sigma = sqrt(ss / y.len() as f64);
            Ok(MleFit { theta, sigma: Some(sigma), iterations: 1, converged: true, separation: false })
        }
        GlmKind::Logistic => {
            let rank = qr.rank();
            if rank < x.cols() || x.rows() < x.cols() {
                return Err(Error::RankDeficient { rank, cols: x.cols() });
            }
            let (theta, iterations, converged, diverging) = newton_logistic(x, y, None, vec![0.0; x.cols()]);
            let fitted_exactly =
                (0..x.rows()).all(|i| (y[i] - expit(dot(x.row(i), &theta))).abs() < 1e-6);
            let separation = diverging || fitted_exactly;
            Ok(MleFit { theta, sigma: None, iterations, converged, separation })
        }
    }
}

fn logistic_loglik(x: &Matrix, y: &[f64], offset: Option<&[f64]>, theta: &[f64]) -> f64 {
    (0..x.rows())
        .map(|i| bernoulli_logit_logpmf(y[i], dot(x.row(i), theta) + offset.map_or(0.0, |o| o[i])))
        .sum()
}

fn logistic_score_info(x: &Matrix, y: &[f64], offset: Option<&[f64]>, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut score = vec![0.0; x.cols()];
    let mut w = vec![0.0; x.rows()];
    for i in 0..x.rows() {
        let p = expit(dot(x.row(i), theta) + offset.map_or(0.0, |o| o[i]));
        axpy(y[i] - p, x.row(i), &mut score);
        w[i] = p * (1.0 - p);
    }
    (score, w)
}

/// Damped Newton iterations on the logistic log-likelihood.
/// Returns `(theta, iterations, converged, separation)`.
fn newton_logistic(
    x: &Matrix,
    y: &[f64],
    offset: Option<&[f64]>,
    mut theta: Vec<f64>,
) -> (Vec<f64>, usize, bool, bool) {
    let mut ll = logistic_loglik(x, y, offset, &theta);
    let mut separation = false;
    for it in 0..MLE_MAX_ITER {
        let (score, w) = logistic_score_info(x, y, offset, &theta);
        if inf_norm(&score) < MLE_TOL {
            return (theta, it, true, separation);
        }
        let mut info = x.weighted_gram(&w);
        let l = match cholesky(&info) {
            Some(l) => l,
            None => {
                let ridge = 1e-10 * (1.0 + (0..info.rows()).map(|i| info.get(i, i)).fold(0.0, f64::max));
                for i in 0..info.rows() {
                    info.set(i, i, info.get(i, i) + ridge);
                }
                match cholesky(&info) {
                    Some(l) => l,
                    None => return (theta, it, false, true),
                }
            }
        };
        let step = cholesky_solve(&l, &score);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let cand_ll = logistic_loglik(x, y, offset, &cand);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if theta.iter().any(|v| v.abs() > SEPARATION_BOUND) {
            separation = true;
            return (theta, it + 1, false, separation);
        }
        if !accepted {
            let (score, _) = logistic_score_info(x, y, offset, &theta);
            return (theta, it + 1, inf_norm(&score) < 1e-6, separation);
        }
    }
    let (score, _) = logistic_score_info(x, y, offset, &theta);
    (theta, MLE_MAX_ITER, inf_norm(&score) < MLE_TOL, separation)
}

/// Fit `ε` in an intercept-free GLM with a fixed offset:
/// `logit(y) = offset + covariates·ε` (logistic) or
/// `y = offset + covariates·ε + noise` (linear).
pub fn offset_glm_fit(kind: GlmKind, offset: &[f64], covariates: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    check_rows(covariates, y.len(), "y")?;
    check_rows(covariates, offset.len(), "offset")?;
    if !(1..=2).contains(&covariates.cols()) {
        return Err(Error::Shape(format!("fluctuation needs 1 or 2 covariates, got {}", covariates.cols())));
    }
    if offset.iter().any(|o| !o.is_finite()) {
        return Err(Error::NonFinite("fluctuation offset".into()));
    }
    if covariates.as_slice().iter().any(|h| !h.is_finite()) {
        return Err(Error::NonFinite("clever covariate".into()));
    }
    match kind {
        GlmKind::Linear => {
            let r: Vec<f64> = y.iter().zip(offset).map(|(a, o)| a - o).collect();
            Qr::new(covariates).solve_least_squares(&r)
        }
        GlmKind::Logistic => {
            let (eps, _, converged, _) = newton_logistic(covariates, y, Some(offset), vec![0.0; covariates.cols()]);
            if !converged {
                return Err(Error::Convergence("fluctuation fit did not converge".into()));
            }
            Ok(eps)
        }
    }
}

/// Log-likelihood helper exposed for tests and diagnostics.
pub fn logistic_log_likelihood(x: &Matrix, y: &[f64], offset: Option<&[f64]>, theta: &[f64]) -> f64 {
    logistic_loglik(x, y, offset, theta)
}

/// `ln σ` for a positive scale, used when seeding samplers from MLE fits.
pub fn log_scale(sigma: f64) -> f64 {
    ln(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_design(n: usize, q: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, 0);
        let mut data = Vec::with_capacity(n * q);
        for _ in 0..n {
            data.push(1.0);
            for _ in 1..q {
                data.push(StandardNormal.sample(&mut rng));
            }
        }
        Matrix::from_vec(n, q, data).unwrap()
    }

    #[test]
    fn logistic_at_zero_is_log_half_per_row() {
        let x = random_design(8, 3, 1);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let m = LogisticDensity::new(&x, &y, 1.0, "theta").unwrap();
        let prior = 3.0 * normal_logpdf(0.0, 0.0, 1.0);
        let lp = m.log_density(&[0.0; 3]);
        assert!((lp - prior - 8.0 * ln(0.5)).abs() < 1e-12);
    }

    #[test]
    fn logistic_single_row_gradient_by_hand() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let m = LogisticDensity::new(&x, &[1.0], 1.0, "theta").unwrap();
        let mut g = [0.0];
        m.log_density_grad(&[0.0], &mut g);
        assert_eq!(g[0], 0.5);
    }

    #[test]
    fn linear_single_row_likelihood_by_hand() {
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let m = LinearDensity::new(&x, &[2.0], 1.0, 1.0, "theta", "sigma").unwrap();
        let lp = m.log_density(&[2.0, 0.0]);
        let lik = -0.5 * crate::math::LN_2PI;
        let rest = normal_logpdf(2.0, 0.0, 1.0) + half_normal_logpdf(1.0, 1.0);
        assert!((lp - lik - rest).abs() < 1e-12);
    }

    #[test]
    fn linear_symmetric_problem_peaks_at_zero() {
        let x = random_design(20, 2, 2);
        let y = [0.0; 20];
        let m = LinearDensity::new(&x, &y, 1.0, 1.0, "theta", "sigma").unwrap();
        let mut g = [0.0; 3];
        m.log_density_grad(&[0.0, 0.0, ln(50.0)], &mut g);
        assert_eq!(&g[..2], &[0.0, 0.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = random_design(60, 4, 3);
        let mut rng = stream_rng(3, 1);
        let yb: Vec<f64> = (0..60).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
        let yc: Vec<f64> = (0..60).map(|_| StandardNormal.sample(&mut rng)).collect();
        let off: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let logi = LogisticDensity::new(&x, &yb, 1.0, "theta").unwrap();
        let logi_off = LogisticDensity::new(&x, &yb, 2.0, "theta").unwrap().with_offset(&off).unwrap();
        let lin = LinearDensity::new(&x, &yc, 1.0, 1.0, "theta", "sigma").unwrap().with_offset(&off).unwrap();
        for _ in 0..20 {
            let t: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert!(gradient_check(&logi, &t[..4]) < 1e-5);
            assert!(gradient_check(&logi_off, &t[..4]) < 1e-5);
            assert!(gradient_check(&lin, &t) < 1e-5);
        }
    }

    #[test]
    fn logistic_mle_satisfies_score_equation() {
        let x = random_design(400, 3, 4);
        let truth = [-0.5, 1.0, -0.7];
        let mut rng = stream_rng(4, 1);
        let y: Vec<f64> =
            (0..400).map(|i| f64::from(u8::from(rng.random_bool(expit(dot(x.row(i), &truth)))))).collect();
        let fit = fit_mle(GlmKind::Logistic, &x, &y).unwrap();
        assert!(fit.converged && !fit.separation);
        let (score, _) = logistic_score_info(&x, &y, None, &fit.theta);
        assert!(inf_norm(&score) < 1e-6);
    }

    #[test]
    fn logistic_mle_is_consistent() {
        let n = 100_000;
        let x = random_design(n, 3, 5);
        let truth = [0.3, -0.8, 0.5];
        let mut rng = stream_rng(5, 1);
        let y: Vec<f64> =
            (0..n).map(|i| f64::from(u8::from(rng.random_bool(expit(dot(x.row(i), &truth)))))).collect();
        let fit = fit_mle(GlmKind::Logistic, &x, &y).unwrap();
        for (a, b) in fit.theta.iter().zip(&truth) {
            assert!((a - b).abs() < 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_mle_on_orthonormal_design_is_projection() {
        let s = 0.5;
        let x = Matrix::from_rows(&[vec![s, s], vec![s, -s], vec![s, s], vec![s, -s]]).unwrap();
        let y = [1.0, 2.0, 4.0, -1.0];
        let fit = fit_mle(GlmKind::Linear, &x, &y).unwrap();
        let xty = x.t_mul_vec(&y);
        for (a, b) in fit.theta.iter().zip(&xty) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(fit.sigma.unwrap() > 0.0);
    }

    #[test]
    fn separated_data_sets_flag() {
        let x = Matrix::from_rows(&[vec![1.0, -2.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let fit = fit_mle(GlmKind::Logistic, &x, &y).unwrap();
        assert!(fit.separation);
    }

    #[test]
    fn rank_deficient_design_is_an_error() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert!(matches!(fit_mle(GlmKind::Logistic, &x, &[0.0, 1.0, 0.0]), Err(Error::RankDeficient { .. })));
        assert!(matches!(fit_mle(GlmKind::Linear, &x, &[0.0, 1.0, 0.0]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn linear_offset_fit_is_exact() {
        let h = Matrix::column_vector(&[1.0, -2.0, 0.5, 3.0]);
        let off = [0.1, 0.2, -0.3, 0.0];
        let y: Vec<f64> = off.iter().zip(h.as_slice()).map(|(o, hh)| o + 0.7 * hh).collect();
        let eps = offset_glm_fit(GlmKind::Linear, &off, &h, &y).unwrap();
        assert!((eps[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn logistic_offset_fit_is_zero_when_score_vanishes() {
        // Two rows with identical offset and opposite y share H, so the score
        // at ε = 0 is zero.
        let h = Matrix::column_vector(&[1.0, 1.0, -2.0, -2.0]);
        let off = [0.0, 0.0, 0.0, 0.0];
        let y = [1.0, 0.0, 1.0, 0.0];
        let eps = offset_glm_fit(GlmKind::Logistic, &off, &h, &y).unwrap();
        assert!(eps[0].abs() < 1e-12);
    }

    #[test]
    fn logistic_offset_fit_matches_grid_search() {
        let h = Matrix::from_rows(&[
            vec![0.0, 2.5],
            vec![1.3, 0.0],
            vec![0.0, 1.4],
            vec![2.0, 0.0],
            vec![0.0, 3.1],
            vec![1.1, 0.0],
        ])
        .unwrap();
        let off = [-0.4, 0.3, 0.8, -1.2, 0.1, 0.5];
        let y = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let eps = offset_glm_fit(GlmKind::Logistic, &off, &h, &y).unwrap();
        // coarse grid, then refine around the best cell twice
        let mut center = (0.0, 0.0);
        let mut half = 3.0;
        for _ in 0..6 {
            let mut best = (f64::NEG_INFINITY, center);
            for i in 0..=60 {
                for j in 0..=60 {
                    let e0 = center.0 - half + 2.0 * half * f64::from(i) / 60.0;
                    let e1 = center.1 - half + 2.0 * half * f64::from(j) / 60.0;
                    let ll = logistic_log_likelihood(&h, &y, Some(&off), &[e0, e1]);
                    if ll > best.0 {
                        best = (ll, (e0, e1));
                    }
                }
            }
            center = best.1;
            half /= 10.0;
        }
        assert!((eps[0] - center.0).abs() < 1e-4, "{} vs {}", eps[0], center.0);
        assert!((eps[1] - center.1).abs() < 1e-4, "{} vs {}", eps[1], center.1);
    }

    #[test]
    fn logistic_offset_fit_solves_targeting_score() {
        let mut rng = stream_rng(9, 0);
        let n = 300;
        let hv: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let off: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.3)))).collect();
        let h = Matrix::column_vector(&hv);
        let eps = offset_glm_fit(GlmKind::Logistic, &off, &h, &y).unwrap();
        let score: f64 = (0..n).map(|i| hv[i] * (y[i] - expit(off[i] + eps[0] * hv[i]))).sum();
        assert!(score.abs() < 1e-6);
    }

    #[test]
    fn non_finite_offset_is_rejected() {
        let h = Matrix::column_vector(&[1.0, 2.0]);
        let err = offset_glm_fit(GlmKind::Logistic, &[f64::INFINITY, 0.0], &h, &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}
