//! Posterior ATE distributions from per-draw targeted predictions.

use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::stats::{gaussian_kde, mean, order_statistic_quantile, sd, silverman_bandwidth, sorted};
use crate::{Error, Result};

/// Which quantity a [`PredictionMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PredictionKind {
    InitialOutcome,
    PropensityScore,
    CleverCovariate,
    TargetedOutcome,
}

/// `d × m` per-unit, per-draw predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub values: Matrix,
    pub kind: PredictionKind,
}

impl PredictionMatrix {
    pub fn n_units(&self) -> usize {
        self.values.rows()
    }

    pub fn n_draws(&self) -> usize {
        self.values.cols()
    }

    /// Mean over units for every draw.
    pub fn column_means(&self) -> Vec<f64> {
        let (d, m) = (self.values.rows(), self.values.cols());
        let mut acc = alloc::vec![0.0; m];
        for i in 0..d {
            for (a, v) in acc.iter_mut().zip(self.values.row(i)) {
                *a += v;
            }
        }
        acc.iter().map(|s| s / d as f64).collect()
    }

    /// Mean over draws for every unit.
    pub fn row_means(&self) -> Vec<f64> {
        (0..self.values.rows()).map(|i| mean(self.values.row(i))).collect()
    }
}

/// Number of KDE grid points.
pub const KDE_POINTS: usize = 512;

/// ATE samples with their summary and density estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AteDistribution {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub bandwidth: f64,
    /// `(x, density)` pairs on an evenly spaced grid.
    pub kde: Vec<(f64, f64)>,
}

impl AteDistribution {
    /// Summarize ATE samples with a central 95% interval.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::with_level(samples, 0.95)
    }

    pub fn with_level(samples: Vec<f64>, level: f64) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::TooFewDraws(m));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidConfig("interval level must lie in (0, 1)".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("ATE samples".into()));
        }
        let mu = mean(&samples);
        let s = sd(&samples);
        let ordered = sorted(&samples);
        let tail = (1.0 - level) / 2.0;
        let ci_low = order_statistic_quantile(&ordered, tail);
        let ci_high = order_statistic_quantile(&ordered, 1.0 - tail);

        let mut h = silverman_bandwidth(&samples);
        if !(h > 0.0) {
            h = 1e-6 * mu.abs().max(1.0);
        }
        let lo = (mu - 4.0 * s).min(ordered[0] - 4.0 * h);
        let hi = (mu + 4.0 * s).max(ordered[m - 1] + 4.0 * h);
        let step = (hi - lo) / (KDE_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..KDE_POINTS).map(|k| lo + step * k as f64).collect();
        let dens = gaussian_kde(&samples, h, &grid);
        Ok(Self {
            samples,
            mean: mu,
            sd: s,
            ci_low,
            ci_high,
            level,
            bandwidth: h,
            kde: grid.into_iter().zip(dens).collect(),
        })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }
}

/// ATE draws `colMean(yf1) − colMean(yf0)`.
pub fn ate_distribution(yf1: &PredictionMatrix, yf0: &PredictionMatrix) -> Result<AteDistribution> {
    if yf1.values.rows() != yf0.values.rows() || yf1.values.cols() != yf0.values.cols() {
        return Err(Error::Shape(alloc::format!(
            "prediction matrices {}x{} and {}x{} differ",
            yf1.values.rows(),
            yf1.values.cols(),
            yf0.values.rows(),
            yf0.values.cols()
        )));
    }
    let samples = yf1.column_means().iter().zip(yf0.column_means()).map(|(a, b)| a - b).collect();
    AteDistribution::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::trapezoid;
    use alloc::vec;
    use proptest::prelude::*;

    fn constant(d: usize, m: usize, v: f64) -> PredictionMatrix {
        PredictionMatrix { values: Matrix::from_vec(d, m, vec![v; d * m]).unwrap(), kind: PredictionKind::TargetedOutcome }
    }

    fn integral(a: &AteDistribution) -> f64 {
        let (x, y): (Vec<f64>, Vec<f64>) = a.kde.iter().copied().unzip();
        trapezoid(&x, &y)
    }

    #[test]
    fn equal_matrices_give_zero_effect() {
        let a = ate_distribution(&constant(3, 10, 0.4), &constant(3, 10, 0.4)).unwrap();
        assert!(a.samples.iter().all(|&s| s == 0.0));
        assert_eq!((a.ci_low, a.ci_high), (0.0, 0.0));
        assert!((integral(&a) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_matrices_give_constant_effect() {
        let a = ate_distribution(&constant(4, 6, 0.7), &constant(4, 6, 0.4)).unwrap();
        assert!(a.samples.iter().all(|&s| (s - 0.3).abs() < 1e-15));
    }

    #[test]
    fn single_draw_is_rejected() {
        assert_eq!(AteDistribution::from_samples(vec![1.0]).unwrap_err(), Error::TooFewDraws(1));
        assert!(ate_distribution(&constant(2, 3, 0.0), &constant(3, 3, 0.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn kde_is_a_density_and_ci_uses_samples(xs in proptest::collection::vec(-5.0f64..5.0, 2..300)) {
            let a = AteDistribution::from_samples(xs.clone()).unwrap();
            prop_assert!(a.kde.iter().all(|&(_, d)| d >= 0.0));
            prop_assert!((integral(&a) - 1.0).abs() < 1e-3);
            prop_assert!(a.ci_low <= a.ci_high);
            prop_assert!(xs.contains(&a.ci_low) && xs.contains(&a.ci_high));
        }
    }
}
