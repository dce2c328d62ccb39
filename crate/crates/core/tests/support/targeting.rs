//! Independent recomputation of the classical targeting score.

use btmle_core::classical::{clever_covariate, targeted_predict, ClassicalTmleFit};
use btmle_core::data::{encode_dataset, Dataset};
use btmle_core::math::expit;

/// `Σ H_i (Y_i − Y_f,i)` from the fitted coefficients of a binary-outcome
/// fit, with `H` the one-parameter clever covariate.
pub fn targeting_score(d: &Dataset, fit: &ClassicalTmleFit) -> f64 {
    let y1 = targeted_predict(fit, d, 1).expect("treated predictions");
    let y0 = targeted_predict(fit, d, 0).expect("control predictions");
    let xa = encode_dataset(d, &fit.propensity_meta, None).expect("propensity design");
    (0..d.n_rows())
        .map(|i| {
            let eta: f64 = xa.values.row(i).iter().zip(&fit.theta_a).map(|(x, t)| x * t).sum();
            let (p, _) = fit.options.guard_propensity(expit(eta));
            let a = d.treatment()[i];
            let (h, _) = clever_covariate(a, p);
            let yf = if a == 1 { y1[i] } else { y0[i] };
            h * (d.outcome()[i] - yf)
        })
        .sum()
}
