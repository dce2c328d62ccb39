//! Subcommand implementations behind the `btmle` binary.

use std::path::{Path, PathBuf};

use btmle_core::data::OutcomeKind;
use btmle_core::simgen::{generate, DgpSpec, MisspecCase};
use serde::{Deserialize, Serialize};

use crate::case_study::{run_case_study, write_case_study, CaseStudyOptions};
use crate::config::FitConfig;
use crate::error::{CliError, CliResult};
use crate::estimate::{run_method, Method};
use crate::report::{emit_report, Format};
use crate::schema::{read_dataset, write_dataset};
use crate::sweep::{self, run_sweep, SweepSpec, SweepSummary};

/// Input of `simulate`: either a full generator spec or a named
/// misspecification case of the binary design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimulateSpec {
    Case(CaseSpec),
    Dgp(DgpSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub case: MisspecCase,
    pub n: usize,
    pub effect_size: f64,
    pub seed: u64,
    #[serde(default)]
    pub label_noise: Option<f64>,
    #[serde(default)]
    pub literal_paper_dgp: bool,
}

impl SimulateSpec {
    pub fn resolve(&self, literal: bool) -> DgpSpec {
        match self {
            SimulateSpec::Dgp(d) => d.clone(),
            SimulateSpec::Case(c) => {
                let mut d = DgpSpec::binary_case(c.case, c.n, c.effect_size, c.seed, literal || c.literal_paper_dgp);
                if let Some(noise) = c.label_noise {
                    d.label_noise = noise;
                }
                d
            }
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(CliError::json(path))
}

#[derive(Debug, Serialize)]
struct GenerationInfo {
    n_rows: usize,
    n_treated: usize,
    clamped: usize,
    flipped: usize,
}

pub fn simulate(spec_path: &Path, out: &Path, literal: bool) -> CliResult<()> {
    let spec: SimulateSpec = read_json(spec_path)?;
    let dgp = spec.resolve(literal);
    dgp.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let g = generate(&dgp)?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    write_dataset(&g.dataset, &out.join("data.csv"), &out.join("schema.json"))?;
    crate::write_json(&out.join("spec.json"), &dgp)?;
    let info = GenerationInfo {
        n_rows: g.dataset.n_rows(),
        n_treated: g.dataset.treatment().iter().filter(|&&a| a == 1).count(),
        clamped: g.clamped,
        flipped: g.flipped,
    };
    crate::write_json(&out.join("generation.json"), &info)
}

pub struct FitArgs<'a> {
    pub data: &'a Path,
    pub schema: &'a Path,
    pub method: &'a str,
    pub config: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub samples: Option<&'a Path>,
}

pub fn fit(args: &FitArgs<'_>) -> CliResult<()> {
    let method = Method::parse(args.method).ok_or_else(|| CliError::Config(format!("unknown method `{}`", args.method)))?;
    let mut cfg = match args.config {
        Some(p) => FitConfig::read(p)?,
        None => FitConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg = cfg.seeded(seed);
    }
    let dataset = read_dataset(args.data, args.schema)?;
    let estimate = run_method(method, &dataset, &cfg)?;
    crate::write_json(args.out, &estimate.to_json())?;
    if let Some(path) = args.samples {
        let file = std::fs::File::create(path).map_err(CliError::io(path))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["draw", "ate"]).map_err(CliError::csv(path))?;
        for (j, s) in estimate.samples.iter().enumerate() {
            w.write_record([j.to_string(), s.to_string()]).map_err(CliError::csv(path))?;
        }
        w.flush().map_err(CliError::io(path))?;
    }
    Ok(())
}

pub fn sweep(spec_path: &Path, out: &Path, resume: bool, workers: Option<usize>) -> CliResult<SweepSummary> {
    let mut spec: SweepSpec = read_json(spec_path)?;
    if let Some(w) = workers {
        spec.worker_count = w;
    }
    run_sweep(&spec, out, resume)
}

pub fn report(input: &Path, format: &str, plot_data: bool) -> CliResult<Vec<PathBuf>> {
    let format = Format::parse(format).ok_or_else(|| CliError::Config(format!("unknown format `{format}`")))?;
    emit_report(input, format, plot_data)
}

pub struct CaseStudyArgs<'a> {
    pub kind: &'a str,
    pub seed: u64,
    pub out: &'a Path,
    pub n: Option<usize>,
    pub config: Option<&'a Path>,
    pub methods: Option<&'a [String]>,
}

pub fn case_study(args: &CaseStudyArgs<'_>) -> CliResult<()> {
    let kind = match args.kind.to_ascii_lowercase().as_str() {
        "binary" => OutcomeKind::Binary,
        "continuous" => OutcomeKind::Continuous,
        other => return Err(CliError::Config(format!("unknown outcome kind `{other}`"))),
    };
    let mut options = CaseStudyOptions::default();
    if let Some(n) = args.n {
        options.n = n;
    }
    if let Some(p) = args.config {
        options.config = FitConfig::read(p)?;
    }
    if let Some(names) = args.methods {
        options.methods = names
            .iter()
            .map(|m| Method::parse(m).ok_or_else(|| CliError::Config(format!("unknown method `{m}`"))))
            .collect::<CliResult<_>>()?;
    }
    let report = run_case_study(kind, args.seed, &options)?;
    write_case_study(&report, args.out)
}

pub fn audit(input: &Path) -> CliResult<sweep::AuditReport> {
    sweep::audit(input)
}
