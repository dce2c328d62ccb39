//! Data-size × misspecification × effect-size coverage sweeps.
//!
//! Every replication is an independent cell with its own seed. Cells run on
//! a bounded pool of worker threads; their rows are committed to an
//! append-only journal in cell order, so the journal (and everything
//! aggregated from it) does not depend on the number of workers, and an
//! interrupted sweep resumes from the cells it already finished.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use btmle_core::rng::mix64;
use btmle_core::simgen::{gen_dataset, DgpSpec, MisspecCase};
use serde::{Deserialize, Serialize};

use crate::config::FitConfig;
use crate::coverage::{summarize, CoverageRow, IntervalOutcome};
use crate::error::{CliError, CliResult};
use crate::estimate::{run_methods, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub data_sizes: Vec<usize>,
    pub replications: usize,
    pub misspecification_cases: Vec<MisspecCase>,
    pub effect_sizes: Vec<f64>,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    /// Number of concurrent replications. Does not affect results.
    pub worker_count: usize,
    /// Use the literal both-misspecified generating process.
    pub literal_paper_dgp: bool,
    pub label_noise: f64,
    pub fit: FitConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            data_sizes: vec![25, 50, 75, 100, 150, 200, 250, 300, 350, 400, 450, 500],
            replications: 100,
            misspecification_cases: MisspecCase::ALL.to_vec(),
            effect_sizes: vec![0.03, 0.15],
            methods: vec![Method::Classical, Method::BnTmle1p],
            base_seed: 0,
            worker_count: 1,
            literal_paper_dgp: false,
            label_noise: 0.05,
            fit: FitConfig::default(),
        }
    }
}

const SIZE_BITS: u32 = 16;
const CASE_BITS: u32 = 4;
const EFFECT_BITS: u32 = 12;
const REP_BITS: u32 = 32;

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.data_sizes.is_empty() || self.misspecification_cases.is_empty() || self.effect_sizes.is_empty() {
            return bad("sweep needs at least one data size, case and effect size");
        }
        if self.methods.is_empty() {
            return bad("sweep needs at least one method");
        }
        if self.replications == 0 || self.worker_count == 0 {
            return bad("replications and worker_count must be positive");
        }
        if self.data_sizes.contains(&0) {
            return bad("data sizes must be positive");
        }
        if self.effect_sizes.iter().any(|e| !e.is_finite()) {
            return bad("effect sizes must be finite");
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return bad("label_noise must lie in [0, 1)");
        }
        let unique = |n: usize, m: usize| n == m;
        if !unique(self.methods.iter().collect::<BTreeSet<_>>().len(), self.methods.len())
            || !unique(self.misspecification_cases.iter().collect::<BTreeSet<_>>().len(), self.misspecification_cases.len())
        {
            return bad("methods and cases must not repeat");
        }
        if self.data_sizes.len() >= 1 << SIZE_BITS
            || self.effect_sizes.len() >= 1 << EFFECT_BITS
            || self.replications as u64 >= 1 << REP_BITS
        {
            return bad("sweep design is too large for seed packing");
        }
        self.fit.validate()
    }

    /// Every cell, ordered by size, case, effect size, then replication.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for size in 0..self.data_sizes.len() {
            for case in 0..self.misspecification_cases.len() {
                for effect in 0..self.effect_sizes.len() {
                    for rep in 0..self.replications {
                        out.push(Cell { size, case, effect, rep });
                    }
                }
            }
        }
        out
    }

    /// Results do not depend on the worker count, so resumption only
    /// compares the rest.
    fn same_design(&self, other: &SweepSpec) -> bool {
        SweepSpec { worker_count: 1, ..self.clone() } == SweepSpec { worker_count: 1, ..other.clone() }
    }
}

/// Indices of one replication in the sweep design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub size: usize,
    pub case: usize,
    pub effect: usize,
    pub rep: usize,
}

impl Cell {
    fn packed(&self) -> u64 {
        ((self.size as u64) << (CASE_BITS + EFFECT_BITS + REP_BITS))
            | ((self.case as u64) << (EFFECT_BITS + REP_BITS))
            | ((self.effect as u64) << REP_BITS)
            | self.rep as u64
    }
}

/// Data seed of a cell. Packing is injective within the validated design
/// and `mix64` is a bijection, so distinct cells get distinct seeds.
pub fn cell_seed(base_seed: u64, cell: &Cell) -> u64 {
    mix64(cell.packed() ^ mix64(base_seed))
}

/// One method's result on one replication, as stored in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub cell: usize,
    pub data_size: usize,
    pub case: MisspecCase,
    pub effect_size: f64,
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub ate_mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub covered: Option<bool>,
    pub converged: Option<bool>,
    pub error: String,
}

impl ReplicationRow {
    pub fn outcome(&self) -> Option<IntervalOutcome> {
        match (self.ate_mean, self.ci_low, self.ci_high) {
            (Some(ate_mean), Some(ci_low), Some(ci_high)) if self.error.is_empty() => {
                Some(IntervalOutcome { ate_mean, ci_low, ci_high })
            }
            _ => None,
        }
    }
}

pub const SPEC_FILE: &str = "sweep_spec.json";
pub const JOURNAL_FILE: &str = "replications.csv";
pub const COVERAGE_CSV: &str = "coverage.csv";
pub const COVERAGE_JSON: &str = "coverage.json";

/// Fit every method on one replication.
pub fn run_cell(spec: &SweepSpec, index: usize, cell: &Cell) -> Vec<ReplicationRow> {
    let seed = cell_seed(spec.base_seed, cell);
    let case = spec.misspecification_cases[cell.case];
    let (n, effect) = (spec.data_sizes[cell.size], spec.effect_sizes[cell.effect]);
    let mut dgp = DgpSpec::binary_case(case, n, effect, seed, spec.literal_paper_dgp);
    dgp.label_noise = spec.label_noise;
    let mut cfg = spec.fit.seeded(seed);
    cfg.bayes.sampler.parallel_chains = spec.worker_count == 1;
    let row = |method: Method| ReplicationRow {
        cell: index,
        data_size: n,
        case,
        effect_size: effect,
        replication: cell.rep,
        seed,
        method,
        ate_mean: None,
        ci_low: None,
        ci_high: None,
        covered: None,
        converged: None,
        error: String::new(),
    };
    let dataset = match gen_dataset(&dgp) {
        Ok(d) => d,
        Err(e) => {
            return spec.methods.iter().map(|&m| ReplicationRow { error: format!("data generation: {e}"), ..row(m) }).collect();
        }
    };
    run_methods(&spec.methods, &dataset, &cfg)
        .into_iter()
        .map(|(m, r)| match r {
            Ok(est) => ReplicationRow {
                ate_mean: Some(est.ate_mean),
                ci_low: Some(est.ci95.0),
                ci_high: Some(est.ci95.1),
                covered: Some(est.contains(effect)),
                converged: Some(est.converged),
                ..row(m)
            },
            Err(e) => ReplicationRow { error: e.to_string(), ..row(m) },
        })
        .collect()
}

fn read_journal(path: &Path) -> CliResult<Vec<ReplicationRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        match r {
            Ok(row) => rows.push(row),
            // A record cut short by an interrupted write ends the journal.
            Err(e) if matches!(e.kind(), csv::ErrorKind::Deserialize { .. } | csv::ErrorKind::UnequalLengths { .. }) => break,
            Err(e) => return Err(CliError::Csv { path: path.into(), source: e }),
        }
    }
    Ok(rows)
}

/// Journal rows of a finished sweep directory.
pub fn load_replications(dir: &Path) -> CliResult<Vec<ReplicationRow>> {
    read_journal(&dir.join(JOURNAL_FILE))
}

/// Journal column names, in field order of [`ReplicationRow`].
pub const JOURNAL_HEADER: [&str; 13] = [
    "cell",
    "data_size",
    "case",
    "effect_size",
    "replication",
    "seed",
    "method",
    "ate_mean",
    "ci_low",
    "ci_high",
    "covered",
    "converged",
    "error",
];

fn write_rows(path: &Path, rows: &[ReplicationRow]) -> CliResult<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    w.write_record(JOURNAL_HEADER).map_err(CliError::csv(path))?;
    for r in rows {
        w.serialize(r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn method_rank(spec: &SweepSpec, m: Method) -> usize {
    spec.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

/// Aggregate journal rows into one coverage row per (size, case, effect,
/// method), in design order.
pub fn aggregate(spec: &SweepSpec, rows: &[ReplicationRow]) -> CliResult<Vec<CoverageRow>> {
    // (size, case, effect, method rank) -> (successful outcomes, failures)
    type Groups = BTreeMap<(usize, usize, usize, usize), (Vec<IntervalOutcome>, usize)>;
    let mut groups = Groups::new();
    let cells = spec.cells();
    for r in rows {
        let cell = cells
            .get(r.cell)
            .ok_or_else(|| CliError::Config(format!("journal row refers to unknown cell {}", r.cell)))?;
        let g = groups.entry((cell.size, cell.case, cell.effect, method_rank(spec, r.method))).or_default();
        match r.outcome() {
            Some(o) => g.0.push(o),
            None => g.1 += 1,
        }
    }
    let mut out = Vec::new();
    for ((size, case, effect, m), (outcomes, failed)) in groups {
        let key = (
            spec.data_sizes[size],
            spec.misspecification_cases[case].label(),
            spec.effect_sizes[effect],
            spec.methods.get(m).map_or("?", |m| m.label()),
        );
        if let Some(row) = summarize(key, &outcomes, failed, spec.effect_sizes[effect])? {
            out.push(row);
        }
    }
    Ok(out)
}

/// Outcome of [`run_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub coverage: Vec<CoverageRow>,
    pub cells_run: usize,
    pub cells_resumed: usize,
    pub failed_rows: usize,
}

/// Run (or resume) a sweep into `out`.
pub fn run_sweep(spec: &SweepSpec, out: &Path, resume: bool) -> CliResult<SweepSummary> {
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let spec_path = out.join(SPEC_FILE);
    let journal = out.join(JOURNAL_FILE);
    let cells = spec.cells();
    let n_methods = spec.methods.len();

    let mut kept: Vec<ReplicationRow> = Vec::new();
    if journal.exists() {
        if !resume {
            return Err(CliError::Config(format!("{} exists; pass --resume to continue it", journal.display())));
        }
        let text = std::fs::read_to_string(&spec_path).map_err(CliError::io(&spec_path))?;
        let previous: SweepSpec = serde_json::from_str(&text).map_err(CliError::json(&spec_path))?;
        if !previous.same_design(spec) {
            return Err(CliError::Config("sweep spec differs from the one being resumed".into()));
        }
        let mut by_cell: BTreeMap<usize, Vec<ReplicationRow>> = BTreeMap::new();
        for r in read_journal(&journal)? {
            by_cell.entry(r.cell).or_default().push(r);
        }
        kept = by_cell.into_values().filter(|v| v.len() == n_methods).flatten().collect();
    }
    crate::write_json(&spec_path, spec)?;
    write_rows(&journal, &kept)?;
    let done: BTreeSet<usize> = kept.iter().map(|r| r.cell).collect();
    let pending: Vec<usize> = (0..cells.len()).filter(|i| !done.contains(i)).collect();

    commit_in_order(spec, &cells, &pending, &journal)?;

    let mut rows = read_journal(&journal)?;
    rows.sort_by_key(|r| (r.cell, method_rank(spec, r.method)));
    write_rows(&journal, &rows)?;
    let coverage = aggregate(spec, &rows)?;
    write_coverage(out, &coverage)?;
    Ok(SweepSummary {
        failed_rows: rows.iter().filter(|r| r.outcome().is_none()).count(),
        coverage,
        cells_run: pending.len(),
        cells_resumed: done.len(),
    })
}

/// Run `pending` cells on the worker pool and append their rows to the
/// journal in cell order.
fn commit_in_order(spec: &SweepSpec, cells: &[Cell], pending: &[usize], journal: &Path) -> CliResult<()> {
    let file = OpenOptions::new().append(true).open(journal).map_err(CliError::io(journal))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Vec<ReplicationRow>)>();
    let workers = spec.worker_count.min(pending.len());
    std::thread::scope(|s| -> CliResult<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&index) = pending.get(k) else { break };
                if tx.send((k, run_cell(spec, index, &cells[index]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut buffer = BTreeMap::new();
        let mut expected = 0;
        for (k, rows) in rx {
            buffer.insert(k, rows);
            while let Some(rows) = buffer.remove(&expected) {
                for r in &rows {
                    w.serialize(r).map_err(CliError::csv(journal))?;
                }
                w.flush().map_err(CliError::io(journal))?;
                expected += 1;
            }
        }
        Ok(())
    })
}

pub fn write_coverage(out: &Path, rows: &[CoverageRow]) -> CliResult<()> {
    let path = out.join(COVERAGE_CSV);
    let file = File::create(&path).map_err(CliError::io(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(CliError::csv(&path))?;
    }
    w.flush().map_err(CliError::io(&path))?;
    crate::write_json(&out.join(COVERAGE_JSON), &rows)
}

pub fn read_coverage(path: &Path) -> CliResult<Vec<CoverageRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    rdr.deserialize().collect::<Result<_, _>>().map_err(CliError::csv(path))
}

pub fn read_spec(path: &Path) -> CliResult<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(CliError::json(path))?;
    spec.validate()?;
    Ok(spec)
}

/// Result of [`audit`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub directory: PathBuf,
    pub rows_checked: usize,
    pub max_abs_difference: f64,
}

pub const AUDIT_TOLERANCE: f64 = 1e-12;

/// Recompute the coverage table of a sweep directory from its journal and
/// compare it with the stored table.
pub fn audit(dir: &Path) -> CliResult<AuditReport> {
    let spec = read_spec(&dir.join(SPEC_FILE))?;
    let recomputed = aggregate(&spec, &load_replications(dir)?)?;
    let stored = read_coverage(&dir.join(COVERAGE_CSV))?;
    if recomputed.len() != stored.len() {
        return Err(CliError::Config(format!(
            "coverage table has {} rows, journal gives {}",
            stored.len(),
            recomputed.len()
        )));
    }
    let mut max_diff: f64 = 0.0;
    for (a, b) in recomputed.iter().zip(&stored) {
        if (a.data_size, &a.case, &a.method, a.replications, a.failed) != (b.data_size, &b.case, &b.method, b.replications, b.failed)
            || a.effect_size != b.effect_size
        {
            return Err(CliError::Config(format!("coverage row mismatch: {a:?} vs {b:?}")));
        }
        for (x, y) in [
            (a.mean_ate_mean, b.mean_ate_mean),
            (a.mean_ate_ci95_low, b.mean_ate_ci95_low),
            (a.mean_ate_ci95_high, b.mean_ate_ci95_high),
            (a.mean_width, b.mean_width),
            (a.width_ci95_low, b.width_ci95_low),
            (a.width_ci95_high, b.width_ci95_high),
            (a.coverage_pct, b.coverage_pct),
            (a.coverage_jeffreys_low, b.coverage_jeffreys_low),
            (a.coverage_jeffreys_high, b.coverage_jeffreys_high),
        ] {
            max_diff = max_diff.max((x - y).abs());
        }
    }
    if max_diff > AUDIT_TOLERANCE {
        return Err(CliError::Config(format!("coverage table differs from journal by {max_diff:e}")));
    }
    Ok(AuditReport { directory: dir.into(), rows_checked: stored.len(), max_abs_difference: max_diff })
}
