//! Target densities with closed-form posteriors for checking the sampler.

use btmle_core::draws::PosteriorDraws;
use btmle_core::glm::{BlockLayout, LogDensity, Transform};
use btmle_core::stats;

/// `x_i ~ N(μ, σ²)` with known `σ` and prior `μ ~ N(m0, s0²)`.
pub struct NormalNormal {
    pub data: Vec<f64>,
    pub noise_sd: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
    layout: BlockLayout,
}

impl NormalNormal {
    pub fn new(data: Vec<f64>, noise_sd: f64, prior_mean: f64, prior_sd: f64) -> Self {
        let mut layout = BlockLayout::new();
        layout.push("mu", 1, Transform::Identity);
        Self { data, noise_sd, prior_mean, prior_sd, layout }
    }

    /// Exact posterior `(mean, sd)`.
    pub fn posterior(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let precision = 1.0 / self.prior_sd.powi(2) + n / self.noise_sd.powi(2);
        let sum: f64 = self.data.iter().sum();
        let mean = (self.prior_mean / self.prior_sd.powi(2) + sum / self.noise_sd.powi(2)) / precision;
        (mean, precision.recip().sqrt())
    }
}

impl LogDensity for NormalNormal {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        let mu = q[0];
        let (s2, p2) = (self.noise_sd.powi(2), self.prior_sd.powi(2));
        let mut lp = -0.5 * (mu - self.prior_mean).powi(2) / p2;
        g[0] = -(mu - self.prior_mean) / p2;
        for x in &self.data {
            lp -= 0.5 * (x - mu).powi(2) / s2;
            g[0] += (x - mu) / s2;
        }
        lp
    }
}

/// Zero-mean bivariate Gaussian with unit variances and correlation `rho`.
pub struct CorrelatedGaussian {
    pub rho: f64,
    layout: BlockLayout,
}

impl CorrelatedGaussian {
    pub fn new(rho: f64) -> Self {
        let mut layout = BlockLayout::new();
        layout.push("x", 2, Transform::Identity);
        Self { rho, layout }
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        [[1.0, self.rho], [self.rho, 1.0]]
    }
}

impl LogDensity for CorrelatedGaussian {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        let det = 1.0 - self.rho * self.rho;
        let (a, b) = (q[0], q[1]);
        g[0] = -(a - self.rho * b) / det;
        g[1] = -(b - self.rho * a) / det;
        -0.5 * (a * a - 2.0 * self.rho * a * b + b * b) / det
    }
}

/// Per-chain slices of coordinate `k` of `block`.
pub fn chains(draws: &PosteriorDraws, block: &str, k: usize) -> Vec<Vec<f64>> {
    let x = draws.block(block).expect("block").coordinate(k);
    x.chunks(draws.n_draws_per_chain()).map(<[f64]>::to_vec).collect()
}

/// Monte Carlo standard errors of the mean and of the sd of a coordinate,
/// using the multi-chain effective sample size.
pub fn mcse(draws: &PosteriorDraws, block: &str, k: usize) -> (f64, f64) {
    let ch = chains(draws, block, k);
    let refs: Vec<&[f64]> = ch.iter().map(Vec::as_slice).collect();
    let ess = stats::effective_sample_size(&refs);
    let sd = stats::sd(&ch.concat());
    (sd / ess.sqrt(), sd / (2.0 * ess).sqrt())
}

/// Sample covariance of a two-coordinate block.
pub fn covariance(draws: &PosteriorDraws, block: &str) -> [[f64; 2]; 2] {
    let b = draws.block(block).expect("block");
    let (x, y) = (b.coordinate(0), b.coordinate(1));
    let (mx, my) = (stats::mean(&x), stats::mean(&y));
    let n = x.len() as f64 - 1.0;
    let cxy = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    [[stats::variance(&x), cxy], [cxy, stats::variance(&y)]]
}
