//! Cross-module properties of the estimators on simulated data.

mod support;

use btmle_core::bayes::{self, BayesConfig, BayesMethod};
use btmle_core::classical::{fit_classical, targeted_predict, FluctuationForm};
use btmle_core::data::{ModelOrder, TmleSpecs};
use btmle_core::sampler::SamplerConfig;
use btmle_core::simgen::{gen_dataset, DgpSpec, MisspecCase};
use btmle_core::stats;
use support::targeting::targeting_score;

#[test]
fn classical_fluctuation_solves_the_score_equation() {
    for case in MisspecCase::ALL {
        for seed in 0..4 {
            let d = gen_dataset(&DgpSpec::binary_case(case, 400, 0.15, seed, false)).unwrap();
            let fit = fit_classical(&d, &TmleSpecs::first_order(), FluctuationForm::OneParam).unwrap();
            let s = targeting_score(&d, &fit);
            assert!(s.abs() < 1e-6, "{case:?} seed {seed}: {s}");
            assert!((s - fit.targeting_score).abs() < 1e-6);
        }
    }
}

#[test]
fn one_and_two_parameter_classical_fits_agree() {
    let d = gen_dataset(&DgpSpec::binary_case_study(5000, 3)).unwrap();
    let specs = TmleSpecs::first_order();
    let one = fit_classical(&d, &specs, FluctuationForm::OneParam).unwrap();
    let two = fit_classical(&d, &specs, FluctuationForm::TwoParam).unwrap();
    assert!((one.ate - two.ate).abs() < 1e-3, "{} vs {}", one.ate, two.ate);
}

#[test]
fn ate_is_the_mean_of_counterfactual_differences() {
    let d = gen_dataset(&DgpSpec::continuous_case_study(600, 8)).unwrap();
    let fit = fit_classical(&d, &TmleSpecs::new(ModelOrder::SecondOrder, ModelOrder::FirstOrder), FluctuationForm::OneParam).unwrap();
    let y1 = targeted_predict(&fit, &d, 1).unwrap();
    let y0 = targeted_predict(&fit, &d, 0).unwrap();
    let diffs: Vec<f64> = y1.iter().zip(&y0).map(|(a, b)| a - b).collect();
    assert!((stats::mean(&diffs) - fit.ate).abs() < 1e-10);
    // Correct outcome model, additive effect: the estimate is close to 0.25.
    assert!((fit.ate - 0.25).abs() < 0.03, "{}", fit.ate);
}

#[test]
fn bayesian_estimators_agree_with_classical() {
    let d = gen_dataset(&DgpSpec::binary_case(MisspecCase::Nms, 1500, 0.15, 21, false)).unwrap();
    let specs = TmleSpecs::first_order();
    let classical = fit_classical(&d, &specs, FluctuationForm::OneParam).unwrap();
    let cfg = BayesConfig {
        sampler: SamplerConfig { n_warmup: 300, n_draws: 300, seed: 4, ..Default::default() },
        ..Default::default()
    };
    for method in BayesMethod::ALL {
        let r = bayes::fit_bayes(method, &d, &specs, &cfg).unwrap();
        assert_eq!(r.ate.samples.len(), 600);
        assert!(
            (r.ate.mean - classical.ate).abs() < 2.0 * classical.se,
            "{method:?}: {} vs {} (se {})",
            r.ate.mean,
            classical.ate,
            classical.se
        );
        assert!(r.ate.ci_low < r.ate.ci_high);
    }
}
