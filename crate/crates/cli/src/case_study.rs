//! Single-dataset comparison of every estimator on the case-study designs.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use btmle_core::data::OutcomeKind;
use btmle_core::simgen::{generate, DgpSpec};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::error::{CliError, CliResult};
use crate::estimate::{run_methods, Estimate, Method};

pub const CASE_STUDY_ROWS: usize = 10_000;
pub const REPORT_FILE: &str = "case_study.json";
pub const TABLE_FILE: &str = "case_study.csv";
pub const KDE_FILE: &str = "kde.csv";

#[derive(Debug, Clone)]
pub struct CaseStudyOptions {
    pub n: usize,
    pub methods: Vec<Method>,
    pub config: FitConfig,
}

impl Default for CaseStudyOptions {
    fn default() -> Self {
        Self {
            n: CASE_STUDY_ROWS,
            methods: vec![Method::Classical, Method::BTmleM, Method::BTmleSS, Method::BnTmle1p],
            config: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodOutcome {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains_truth: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudyReport {
    pub outcome_kind: OutcomeKind,
    pub seed: u64,
    pub truth: f64,
    pub dgp: DgpSpec,
    /// Rows whose treated-arm probability had to be clamped.
    pub clamped: usize,
    /// Outcome labels flipped by label noise.
    pub flipped: usize,
    pub config: FitConfig,
    pub methods: Vec<MethodOutcome>,
}

impl CaseStudyReport {
    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn estimate(&self, method: Method) -> Option<&Estimate> {
        self.outcome(method).and_then(|m| m.estimate.as_ref())
    }
}

pub fn case_study_spec(kind: OutcomeKind, n: usize, seed: u64) -> DgpSpec {
    match kind {
        OutcomeKind::Binary => DgpSpec::binary_case_study(n, seed),
        OutcomeKind::Continuous => DgpSpec::continuous_case_study(n, seed),
    }
}

/// Generate the case-study dataset for `seed` and fit every requested
/// estimator on it. Estimator failures are recorded, not raised.
pub fn run_case_study(kind: OutcomeKind, seed: u64, options: &CaseStudyOptions) -> CliResult<CaseStudyReport> {
    options.config.validate()?;
    let dgp = case_study_spec(kind, options.n, seed);
    let generated = generate(&dgp)?;
    let cfg = options.config.seeded(seed);
    let methods = run_methods(&options.methods, &generated.dataset, &cfg)
        .into_iter()
        .map(|(method, r)| match r {
            Ok(e) => MethodOutcome { method, contains_truth: Some(e.contains(dgp.effect_size)), estimate: Some(e), error: None },
            Err(e) => MethodOutcome { method, estimate: None, error: Some(e.to_string()), contains_truth: None },
        })
        .collect();
    Ok(CaseStudyReport {
        outcome_kind: kind,
        seed,
        truth: dgp.effect_size,
        clamped: generated.clamped,
        flipped: generated.flipped,
        dgp,
        config: options.config.clone(),
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub ate_mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub sd: Option<f64>,
    pub contains_truth: Option<bool>,
    pub converged: Option<bool>,
    pub error: String,
}

pub fn table_rows(report: &CaseStudyReport) -> Vec<TableRow> {
    report
        .methods
        .iter()
        .map(|m| {
            let e = m.estimate.as_ref();
            TableRow {
                method: m.method,
                ate_mean: e.map(|e| e.ate_mean),
                ci_low: e.map(|e| e.ci95.0),
                ci_high: e.map(|e| e.ci95.1),
                sd: e.map(|e| e.sd),
                contains_truth: m.contains_truth,
                converged: e.map(|e| e.converged),
                error: m.error.clone().unwrap_or_default(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeRow {
    pub method: Method,
    pub x: f64,
    pub density: f64,
}

pub fn kde_rows(report: &CaseStudyReport) -> Vec<KdeRow> {
    report
        .methods
        .iter()
        .filter_map(|m| m.estimate.as_ref().map(|e| (m.method, e)))
        .flat_map(|(method, e)| e.kde.iter().map(move |&(x, density)| KdeRow { method, x, density }))
        .collect()
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Write the full report, the comparison table and the KDE curves.
pub fn write_case_study(report: &CaseStudyReport, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    crate::write_json(&out.join(REPORT_FILE), report)?;
    write_csv(&out.join(TABLE_FILE), &table_rows(report))?;
    write_csv(&out.join(KDE_FILE), &kde_rows(report))
}

pub fn read_case_study(path: &Path) -> CliResult<CaseStudyReport> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(CliError::json(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CaseStudyOptions {
        let mut o = CaseStudyOptions { n: 400, ..CaseStudyOptions::default() };
        o.config.bayes.sampler.n_warmup = 150;
        o.config.bayes.sampler.n_draws = 100;
        o
    }

    #[test]
    fn report_round_trips_through_json() {
        let report = run_case_study(OutcomeKind::Binary, 3, &small()).unwrap();
        assert_eq!(report.methods.len(), 4);
        assert_eq!(report.truth, 0.03);
        let dir = tempfile::tempdir().unwrap();
        write_case_study(&report, dir.path()).unwrap();
        let mut back = read_case_study(&dir.path().join(REPORT_FILE)).unwrap();
        for m in back.methods.iter_mut().zip(&report.methods) {
            if let (Some(b), Some(a)) = (m.0.estimate.as_mut(), m.1.estimate.as_ref()) {
                b.samples = a.samples.clone();
            }
        }
        assert_eq!(back, report);
        let kde = kde_rows(&report);
        assert!(kde.iter().all(|r| r.density >= 0.0));
        assert!(kde.iter().any(|r| r.method == Method::BnTmle1p));
    }

    #[test]
    fn estimator_failures_are_recorded() {
        let mut o = small();
        o.config.bayes.sampler.n_draws = 1;
        o.config.bayes.sampler.n_chains = 1;
        let report = run_case_study(OutcomeKind::Continuous, 1, &o).unwrap();
        assert!(report.estimate(Method::Classical).is_some());
        assert!(report.outcome(Method::BnTmle1p).unwrap().error.is_some());
    }
}
