//! Per-draw predictions over a dataset.
//!
//! The `d × m` matrices are large at case-study scale, so the estimators
//! only ever stream over them: row summaries walk draws for a fixed row,
//! column means walk rows for a fixed draw. Column means are accumulated in
//! row order, the same order [`PredictionMatrix::column_means`] uses, so a
//! materialized matrix reproduces the streamed means exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::ate::{PredictionKind, PredictionMatrix};
use crate::classical::{clamp_logit, fluctuation_shift, targeted_value, FluctuationForm, TmleOptions};
use crate::data::{DesignMatrix, OutcomeKind, OutcomeScale};
use crate::draws::{Block, PosteriorDraws};
use crate::linalg::{dot, Matrix};
use crate::math::{clamp_prob, expit, logit};
use crate::stats::Welford;
use crate::{Error, Result};

use super::density::{SummaryStats, SUMMARY_SD_FLOOR};

/// Fluctuation parameters of every draw, `[ε]` or `[ε0, ε1]`.
pub(crate) fn epsilon_draws(draws: &PosteriorDraws, form: FluctuationForm) -> Result<Vec<[f64; 2]>> {
    let m = draws.n_draws();
    match form {
        FluctuationForm::OneParam => {
            let b = draws.require("epsilon")?;
            Ok((0..m).map(|j| [b.draw(j)[0], 0.0]).collect())
        }
        FluctuationForm::TwoParam => {
            let (b0, b1) = (draws.require("epsilon0")?, draws.require("epsilon1")?);
            Ok((0..m).map(|j| [b0.draw(j)[0], b1.draw(j)[0]]).collect())
        }
    }
}

fn check_block(block: &Block, width: usize) -> Result<()> {
    if block.dim != width {
        return Err(Error::Shape(alloc::format!(
            "block `{}` has dimension {}, design has {width} columns",
            block.name, block.dim
        )));
    }
    Ok(())
}

/// Designs and coefficient draws needed to predict for one dataset.
pub(crate) struct Predictor<'a> {
    pub theta_y: &'a Block,
    pub theta_a: &'a Block,
    pub xa: &'a DesignMatrix,
    pub kind: OutcomeKind,
    pub scale: OutcomeScale,
    pub options: TmleOptions,
}

impl<'a> Predictor<'a> {
    pub fn new(
        draws: &'a PosteriorDraws,
        xa: &'a DesignMatrix,
        outcome_cols: usize,
        kind: OutcomeKind,
        scale: OutcomeScale,
        options: TmleOptions,
    ) -> Result<Self> {
        let theta_y = draws.require("theta_Y")?;
        let theta_a = draws.require("theta_A")?;
        check_block(theta_y, outcome_cols)?;
        check_block(theta_a, xa.cols())?;
        Ok(Self { theta_y, theta_a, xa, kind, scale, options })
    }

    fn n_draws(&self) -> usize {
        self.theta_y.n_draws()
    }

    #[inline]
    fn propensity(&self, i: usize, j: usize) -> (f64, bool) {
        self.options.guard_propensity(expit(dot(self.xa.values.row(i), self.theta_a.draw(j))))
    }

    /// Value reported to users: probabilities for binary outcomes, the
    /// original scale for continuous ones.
    #[inline]
    fn report(&self, v: f64) -> f64 {
        match self.kind {
            OutcomeKind::Binary => v,
            OutcomeKind::Continuous => self.scale.restore(v),
        }
    }

    /// Per-row summaries over draws at the rows' own treatments (`xo` is the
    /// observed-treatment outcome design). Returns the summary statistics
    /// together with the row means of the initial prediction on the
    /// probability (binary) or fitting (continuous) scale and the row means
    /// of `H0` and `H1`.
    pub fn row_summaries(&self, xo: &DesignMatrix, a: &[u8]) -> (SummaryStats, Vec<f64>, Vec<[f64; 2]>) {
        let (d, m) = (xo.rows(), self.n_draws());
        let mut stats = SummaryStats {
            mu_yinit: vec![0.0; d],
            sd_yinit: vec![0.0; d],
            mu_h: vec![0.0; d],
            sd_h: vec![0.0; d],
        };
        let mut mean_init = vec![0.0; d];
        let mut mean_h01 = vec![[0.0; 2]; d];
        for i in 0..d {
            let row = xo.values.row(i);
            let (mut wl, mut wh) = (Welford::default(), Welford::default());
            let mut init_sum = 0.0;
            for j in 0..m {
                let eta = dot(row, self.theta_y.draw(j));
                let (p, _) = self.propensity(i, j);
                match self.kind {
                    OutcomeKind::Binary => {
                        wl.push(clamp_logit(eta));
                        init_sum += expit(eta);
                    }
                    OutcomeKind::Continuous => {
                        wl.push(eta);
                        init_sum += eta;
                    }
                }
                wh.push(fluctuation_shift(FluctuationForm::OneParam, &[1.0], a[i], p));
            }
            stats.mu_yinit[i] = wl.mean();
            stats.sd_yinit[i] = wl.sd().max(SUMMARY_SD_FLOOR);
            stats.mu_h[i] = wh.mean();
            stats.sd_h[i] = wh.sd().max(SUMMARY_SD_FLOOR);
            mean_init[i] = init_sum / m as f64;
            let h = wh.mean();
            mean_h01[i] = if a[i] == 1 { [0.0, h] } else { [-h, 0.0] };
        }
        for s in stats.sd_yinit.iter_mut().chain(stats.sd_h.iter_mut()) {
            if !s.is_finite() {
                *s = SUMMARY_SD_FLOOR;
            }
        }
        (stats, mean_init, mean_h01)
    }

    /// Materialized initial predictions and one-parameter clever covariates
    /// under the treatments `a`.
    pub fn initial_matrices(&self, xo: &DesignMatrix, a: &[u8]) -> (PredictionMatrix, PredictionMatrix) {
        let (d, m) = (xo.rows(), self.n_draws());
        let mut y = Matrix::zeros(d, m);
        let mut h = Matrix::zeros(d, m);
        for i in 0..d {
            let row = xo.values.row(i);
            for j in 0..m {
                let eta = dot(row, self.theta_y.draw(j));
                let v = match self.kind {
                    OutcomeKind::Binary => expit(eta),
                    OutcomeKind::Continuous => self.scale.restore(eta),
                };
                y.set(i, j, v);
                let (p, _) = self.propensity(i, j);
                h.set(i, j, fluctuation_shift(FluctuationForm::OneParam, &[1.0], a[i], p));
            }
        }
        (
            PredictionMatrix { values: y, kind: PredictionKind::InitialOutcome },
            PredictionMatrix { values: h, kind: PredictionKind::CleverCovariate },
        )
    }

    /// Column means of the targeted predictions under `do(A=1)` and
    /// `do(A=0)`, optionally writing the full matrices.
    pub fn targeted(
        &self,
        xo1: &DesignMatrix,
        xo0: &DesignMatrix,
        form: FluctuationForm,
        eps: &[[f64; 2]],
        materialize: bool,
    ) -> Result<Targeted> {
        let (d, m) = (xo1.rows(), self.n_draws());
        if eps.len() != m {
            return Err(Error::Shape(alloc::format!("{} fluctuation draws for {m} coefficient draws", eps.len())));
        }
        let mut mats = materialize.then(|| (Matrix::zeros(d, m), Matrix::zeros(d, m)));
        let mut means1 = Vec::with_capacity(m);
        let mut means0 = Vec::with_capacity(m);
        let mut clamped = 0usize;
        for (j, e) in eps.iter().enumerate() {
            let (ty, ta) = (self.theta_y.draw(j), self.theta_a.draw(j));
            let (mut s1, mut s0) = (0.0, 0.0);
            for i in 0..d {
                let (p, c) = self.options.guard_propensity(expit(dot(self.xa.values.row(i), ta)));
                clamped += usize::from(c);
                let v1 = self.report(targeted_value(
                    self.kind,
                    dot(xo1.values.row(i), ty),
                    fluctuation_shift(form, e, 1, p),
                ));
                let v0 = self.report(targeted_value(
                    self.kind,
                    dot(xo0.values.row(i), ty),
                    fluctuation_shift(form, e, 0, p),
                ));
                if !(v1.is_finite() && v0.is_finite()) {
                    return Err(Error::NonFinite(alloc::format!("targeted prediction at row {i}, draw {j}")));
                }
                s1 += v1;
                s0 += v0;
                if let Some((m1, m0)) = mats.as_mut() {
                    m1.set(i, j, v1);
                    m0.set(i, j, v0);
                }
            }
            means1.push(s1 / d as f64);
            means0.push(s0 / d as f64);
        }
        let matrices = mats.map(|(m1, m0)| {
            (
                PredictionMatrix { values: m1, kind: PredictionKind::TargetedOutcome },
                PredictionMatrix { values: m0, kind: PredictionKind::TargetedOutcome },
            )
        });
        Ok(Targeted { means1, means0, matrices, clamped })
    }
}

pub(crate) struct Targeted {
    pub means1: Vec<f64>,
    pub means0: Vec<f64>,
    pub matrices: Option<(PredictionMatrix, PredictionMatrix)>,
    /// `(row, draw)` pairs whose propensity needed the numerical guard.
    pub clamped: usize,
}

/// Logit of a row-mean probability, guarded like any other probability.
pub(crate) fn mean_probability_logit(p: f64) -> f64 {
    logit(clamp_prob(p).0)
}
