//! Scalar helpers: link functions, clamping and log densities.
//!
//! Transcendental functions go through this module so the crate builds
//! without `std`; with `std` enabled the platform implementations are used.

use core::f64::consts::PI;

/// Lower and upper guard applied to probabilities before taking a logit or
/// dividing by them.
pub const PROB_FLOOR: f64 = 1e-9;
pub const PROB_CEIL: f64 = 1.0 - 1e-9;

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        x.floor()
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        x.ceil()
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        libm::floor(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        libm::ceil(x)
    }
    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
}

pub use imp::{ceil, exp, floor, ln, ln_1p, powf, sqrt};

/// Logistic function `1 / (1 + e^-x)`, evaluated without overflow.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Log-odds of `p`. No clamping; see [`clamp_prob`].
#[inline]
pub fn logit(p: f64) -> f64 {
    ln(p / (1.0 - p))
}

/// Clamp a probability into `[PROB_FLOOR, PROB_CEIL]`. The flag is set when
/// the input was outside that range.
#[inline]
pub fn clamp_prob(p: f64) -> (f64, bool) {
    if p < PROB_FLOOR {
        (PROB_FLOOR, true)
    } else if p > PROB_CEIL {
        (PROB_CEIL, true)
    } else {
        (p, false)
    }
}

/// `ln(1 + e^x)`.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + ln_1p(exp(-x))
    } else {
        ln_1p(exp(x))
    }
}

/// Bernoulli log-likelihood of `y ∈ {0,1}` at log-odds `eta`.
#[inline]
pub fn bernoulli_logit_logpmf(y: f64, eta: f64) -> f64 {
    y * eta - log1pexp(eta)
}

/// Bernoulli log-likelihood at log-odds `eta` together with the score
/// residual `y − expit(eta)`, sharing one exponential.
#[inline]
pub fn bernoulli_logit_parts(y: f64, eta: f64) -> (f64, f64) {
    let e = exp(-eta.abs());
    let p = if eta >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let log1pexp = eta.max(0.0) + ln_1p(e);
    (y * eta - log1pexp, y - p)
}

/// Gaussian log density with standard deviation `sd`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * LN_2PI - ln(sd) - 0.5 * z * z
}

/// Half-normal log density on `x ≥ 0` with scale `scale`.
#[inline]
pub fn half_normal_logpdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    core::f64::consts::LN_2 + normal_logpdf(x, 0.0, scale)
}

/// `ln(e^a + e^b)` with infinities handled.
#[inline]
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + ln_1p(exp(b - a))
    } else {
        b + ln_1p(exp(a - b))
    }
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    exp(-0.5 * x * x) / sqrt(2.0 * PI)
}
