//! Coverage of interval estimates over replications.

use btmle_core::stats::{interpolated_quantile, mean, sorted};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{CliError, CliResult};

/// Jeffreys interval for a binomial proportion: central quantiles of
/// `Beta(x + ½, n − x + ½)`, with the lower end pinned to 0 when `x = 0`
/// and the upper end pinned to 1 when `x = n`.
pub fn jeffreys_interval(successes: u64, trials: u64, level: f64) -> CliResult<(f64, f64)> {
    if trials == 0 {
        return Err(CliError::Config("Jeffreys interval needs at least one trial".into()));
    }
    if successes > trials {
        return Err(CliError::Config(format!("{successes} successes out of {trials} trials")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config("interval level must lie in (0, 1)".into()));
    }
    let a = successes as f64 + 0.5;
    let b = (trials - successes) as f64 + 0.5;
    let beta = Beta::new(a, b).map_err(|e| CliError::Config(e.to_string()))?;
    let tail = (1.0 - level) / 2.0;
    let low = if successes == 0 { 0.0 } else { beta.inverse_cdf(tail) };
    let high = if successes == trials { 1.0 } else { beta.inverse_cdf(1.0 - tail) };
    Ok((low, high))
}

/// Coverage summary of one (size, case, effect, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub data_size: usize,
    pub case: String,
    pub effect_size: f64,
    pub method: String,
    pub replications: usize,
    pub failed: usize,
    pub mean_ate_mean: f64,
    pub mean_ate_ci95_low: f64,
    pub mean_ate_ci95_high: f64,
    pub mean_width: f64,
    pub width_ci95_low: f64,
    pub width_ci95_high: f64,
    pub coverage_pct: f64,
    pub coverage_jeffreys_low: f64,
    pub coverage_jeffreys_high: f64,
}

/// Interval outcome of one successful replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalOutcome {
    pub ate_mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl IntervalOutcome {
    pub fn covers(&self, truth: f64) -> bool {
        self.ci_low <= truth && truth <= self.ci_high
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// Central 95% range of `xs` (linear interpolation between order
/// statistics).
fn spread(xs: &[f64]) -> (f64, f64) {
    let s = sorted(xs);
    (interpolated_quantile(&s, 0.025), interpolated_quantile(&s, 0.975))
}

/// Aggregate the successful replications of one cell. Returns `None` when
/// none succeeded.
pub fn summarize(
    key: (usize, &str, f64, &str),
    outcomes: &[IntervalOutcome],
    failed: usize,
    truth: f64,
) -> CliResult<Option<CoverageRow>> {
    if outcomes.is_empty() {
        return Ok(None);
    }
    let means: Vec<f64> = outcomes.iter().map(|o| o.ate_mean).collect();
    let widths: Vec<f64> = outcomes.iter().map(IntervalOutcome::width).collect();
    let hits = outcomes.iter().filter(|o| o.covers(truth)).count();
    let n = outcomes.len();
    let (jl, jh) = jeffreys_interval(hits as u64, n as u64, 0.95)?;
    let (ml, mh) = spread(&means);
    let (wl, wh) = spread(&widths);
    Ok(Some(CoverageRow {
        data_size: key.0,
        case: key.1.to_string(),
        effect_size: key.2,
        method: key.3.to_string(),
        replications: n,
        failed,
        mean_ate_mean: mean(&means),
        mean_ate_ci95_low: ml,
        mean_ate_ci95_high: mh,
        mean_width: mean(&widths),
        width_ci95_low: wl,
        width_ci95_high: wh,
        coverage_pct: 100.0 * hits as f64 / n as f64,
        coverage_jeffreys_low: 100.0 * jl,
        coverage_jeffreys_high: 100.0 * jh,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `∫_0^x t^(a−1) (1−t)^(b−1) dt` by composite Simpson on `n` panels.
    fn simpson(a: f64, b: f64, x: f64, n: usize) -> f64 {
        let f = |t: f64| if t <= 0.0 || t >= 1.0 { f64::NEG_INFINITY } else { (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() };
        let h = x / n as f64;
        let mut s = f(0.0).exp() + f(x).exp();
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h).exp();
        }
        s * h / 3.0
    }

    /// Beta quantile by bisection on a numerically integrated CDF.
    fn beta_quantile_oracle(a: f64, b: f64, p: f64) -> f64 {
        let total = simpson(a, b, 1.0, 200_000);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if simpson(a, b, mid, 20_000) / total < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn jeffreys_matches_independent_beta_quantiles() {
        let (lo, hi) = jeffreys_interval(93, 100, 0.95).unwrap();
        assert!((lo - beta_quantile_oracle(93.5, 7.5, 0.025)).abs() < 1e-6, "{lo}");
        assert!((hi - beta_quantile_oracle(93.5, 7.5, 0.975)).abs() < 1e-6, "{hi}");
    }

    #[test]
    fn jeffreys_boundaries_are_pinned() {
        assert_eq!(jeffreys_interval(0, 20, 0.95).unwrap().0, 0.0);
        assert_eq!(jeffreys_interval(20, 20, 0.95).unwrap().1, 1.0);
        assert!(jeffreys_interval(0, 0, 0.95).is_err());
        assert!(jeffreys_interval(3, 2, 0.95).is_err());
    }

    #[test]
    fn coverage_arithmetic() {
        let outcomes: Vec<IntervalOutcome> = (0..100)
            .map(|k| if k < 93 { IntervalOutcome { ate_mean: 0.1, ci_low: 0.0, ci_high: 0.2 } } else { IntervalOutcome { ate_mean: 0.5, ci_low: 0.4, ci_high: 0.6 } })
            .collect();
        let row = summarize((100, "NMS", 0.15, "Classical"), &outcomes, 2, 0.15).unwrap().unwrap();
        assert_eq!(row.coverage_pct, 93.0);
        assert_eq!(row.failed, 2);
        assert!((row.mean_width - 0.2).abs() < 1e-12);
        assert!(summarize((1, "NMS", 0.1, "x"), &[], 3, 0.1).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn jeffreys_interval_is_ordered_and_contains_the_proportion(n in 1u64..300, frac in 0.0f64..=1.0) {
            let x = ((n as f64) * frac).round() as u64;
            let (lo, hi) = jeffreys_interval(x, n, 0.95).unwrap();
            let p = x as f64 / n as f64;
            prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        }
    }
}
