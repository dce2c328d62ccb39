//! Descriptive statistics and MCMC diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ceil, floor, powf, sqrt};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Sample standard deviation with denominator `n - 1`.
pub fn sd(xs: &[f64]) -> f64 {
    sqrt(variance(xs))
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance with denominator `n - 1`; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn sd(&self) -> f64 {
        sqrt(self.variance())
    }
}

/// Inverse empirical CDF of already sorted data: the smallest order
/// statistic `x_(k)` with `k/n ≥ p`. Always returns an element of `sorted`.
pub fn order_statistic_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let k = ceil(p * n as f64) as usize;
    sorted[k.clamp(1, n) - 1]
}

/// Linear-interpolation quantile (type 7) of sorted data.
pub fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p;
    let lo = floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Split-R̂ over chains of equal length. Each chain is cut in half and the
/// classic between/within ratio is taken over the halves.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let half = n / 2;
    if half < 2 {
        return f64::NAN;
    }
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[half..2 * half]);
    }
    let means: Vec<f64> = pieces.iter().map(|p| mean(p)).collect();
    let vars: Vec<f64> = pieces.iter().map(|p| variance(p)).collect();
    let w = mean(&vars);
    let b_over_n = variance(&means);
    if w == 0.0 {
        return if b_over_n == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let nf = half as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    sqrt(var_plus / w)
}

/// Effective sample size across chains using Geyer's initial monotone
/// sequence on the combined autocorrelation estimate.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov: Vec<Vec<f64>> = chains.iter().zip(&means).map(|(c, &mu)| autocovariance(c, mu)).collect();
    let w = acov.iter().map(|a| a[0] * n as f64 / (n - 1) as f64).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { variance(&means) } else { 0.0 };
    let var_plus = w * (n - 1) as f64 / n as f64 + b_over_n;
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |t: usize| -> f64 {
        let avg = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (w - avg) / var_plus
    };
    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut t = 1;
    let mut last = 0;
    while t + 1 < n {
        rho_hat[t] = rho(t);
        rho_hat[t + 1] = rho(t + 1);
        if rho_hat[t] + rho_hat[t + 1] < 0.0 {
            break;
        }
        last = t + 1;
        t += 2;
    }
    // enforce monotone decrease of the paired sums
    let mut k = 1;
    while k + 2 <= last {
        let prev = rho_hat[k - 1] + rho_hat[k];
        let cur = rho_hat[k + 1] + rho_hat[k + 2];
        if cur > prev {
            rho_hat[k + 1] = prev / 2.0;
            rho_hat[k + 2] = prev / 2.0;
        }
        k += 2;
    }
    let tau = -1.0 + 2.0 * rho_hat[..=last].iter().sum::<f64>();
    let log10_draws = crate::math::ln((m * n) as f64) / core::f64::consts::LN_10;
    let tau = tau.max(1.0 / log10_draws.max(1.0));
    (m * n) as f64 / tau
}

fn autocovariance(xs: &[f64], mu: f64) -> Vec<f64> {
    // Direct O(n·lag) evaluation, truncated where the estimate is consumed.
    let n = xs.len();
    let centered: Vec<f64> = xs.iter().map(|x| x - mu).collect();
    let max_lag = n.min(1000);
    let mut out = vec![0.0; n];
    for (lag, slot) in out.iter_mut().enumerate().take(max_lag) {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += centered[i] * centered[i + lag];
        }
        *slot = s / n as f64;
    }
    out
}

/// Silverman's rule-of-thumb bandwidth for a Gaussian kernel:
/// `0.9 · min(sd, IQR/1.34) · n^(-1/5)`, falling back to `sd` when the IQR
/// is zero.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len();
    let s = sd(xs);
    let sorted = sorted(xs);
    let iqr = interpolated_quantile(&sorted, 0.75) - interpolated_quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { s.min(iqr / 1.34) } else { s };
    0.9 * spread * powf(n as f64, -0.2)
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn gaussian_kde(xs: &[f64], bandwidth: f64, grid: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (xs.len() as f64 * bandwidth);
    grid.iter()
        .map(|&g| {
            let s: f64 = xs.iter().map(|&x| crate::math::std_normal_pdf((g - x) / bandwidth)).sum();
            s * norm
        })
        .collect()
}

/// Trapezoid-rule integral of `ys` over the abscissae `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}
