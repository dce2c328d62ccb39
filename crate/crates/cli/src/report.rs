//! Tables and plot-ready series from sweep and case-study directories.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::case_study::{self, kde_rows, read_case_study, table_rows, write_csv};
use crate::coverage::CoverageRow;
use crate::error::{CliError, CliResult};
use crate::estimate::Method;
use crate::sweep::{self, read_coverage, read_spec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub const REPORT_DIR: &str = "report";

/// One point of a coverage-versus-size curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub case: String,
    pub effect_size: f64,
    pub method: String,
    pub data_size: usize,
    pub coverage_pct: f64,
    pub coverage_jeffreys_low: f64,
    pub coverage_jeffreys_high: f64,
    pub mean_width: f64,
    pub width_ci95_low: f64,
    pub width_ci95_high: f64,
    pub mean_ate_mean: f64,
    pub mean_ate_ci95_low: f64,
    pub mean_ate_ci95_high: f64,
}

/// Coverage rows regrouped into one series per (case, effect size,
/// method), each ordered by data size.
pub fn coverage_series(rows: &[CoverageRow]) -> Vec<CoveragePoint> {
    let mut points: Vec<CoveragePoint> = rows
        .iter()
        .map(|r| CoveragePoint {
            case: r.case.clone(),
            effect_size: r.effect_size,
            method: r.method.clone(),
            data_size: r.data_size,
            coverage_pct: r.coverage_pct,
            coverage_jeffreys_low: r.coverage_jeffreys_low,
            coverage_jeffreys_high: r.coverage_jeffreys_high,
            mean_width: r.mean_width,
            width_ci95_low: r.width_ci95_low,
            width_ci95_high: r.width_ci95_high,
            mean_ate_mean: r.mean_ate_mean,
            mean_ate_ci95_low: r.mean_ate_ci95_low,
            mean_ate_ci95_high: r.mean_ate_ci95_high,
        })
        .collect();
    points.sort_by(|a, b| {
        a.case
            .cmp(&b.case)
            .then(a.effect_size.total_cmp(&b.effect_size))
            .then(a.method.cmp(&b.method))
            .then(a.data_size.cmp(&b.data_size))
    });
    points
}

fn emit<T: Serialize>(dir: &Path, stem: &str, format: Format, rows: &[T]) -> CliResult<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&path, rows)?,
        Format::Json => crate::write_json(&path, &rows)?,
    }
    Ok(path)
}

/// Write report files for the sweep or case-study results in `input`
/// into `input/report`, returning the paths written.
pub fn emit_report(input: &Path, format: Format, plot_data: bool) -> CliResult<Vec<PathBuf>> {
    let out = input.join(REPORT_DIR);
    let mut written = Vec::new();
    if input.join(sweep::SPEC_FILE).exists() {
        read_spec(&input.join(sweep::SPEC_FILE))?;
        let rows = read_coverage(&input.join(sweep::COVERAGE_CSV))?;
        if rows.is_empty() {
            return Err(CliError::Config(format!("{} has no coverage rows", input.display())));
        }
        std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
        written.push(emit(&out, "coverage", format, &rows)?);
        if plot_data {
            written.push(emit(&out, "coverage_series", format, &coverage_series(&rows))?);
        }
    } else if input.join(case_study::REPORT_FILE).exists() {
        let report = read_case_study(&input.join(case_study::REPORT_FILE))?;
        if report.methods.is_empty() {
            return Err(CliError::Config(format!("{} has no method results", input.display())));
        }
        std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
        written.push(emit(&out, "comparison", format, &table_rows(&report))?);
        if plot_data {
            let kde = kde_rows(&report);
            for method in Method::ALL {
                let rows: Vec<_> = kde.iter().filter(|r| r.method == method).collect();
                if !rows.is_empty() {
                    written.push(emit(&out, &format!("kde_{}", method.label()), format, &rows)?);
                }
            }
        }
    } else {
        return Err(CliError::Config(format!("{} holds neither sweep nor case-study results", input.display())));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(case: &str, effect: f64, method: &str, n: usize) -> CoverageRow {
        CoverageRow {
            data_size: n,
            case: case.into(),
            effect_size: effect,
            method: method.into(),
            replications: 10,
            failed: 0,
            mean_ate_mean: 0.1,
            mean_ate_ci95_low: 0.0,
            mean_ate_ci95_high: 0.2,
            mean_width: 0.3,
            width_ci95_low: 0.2,
            width_ci95_high: 0.4,
            coverage_pct: 90.0,
            coverage_jeffreys_low: 60.0,
            coverage_jeffreys_high: 99.0,
        }
    }

    #[test]
    fn series_are_grouped_then_ordered_by_size() {
        let rows = vec![
            row("OMS", 0.15, "Classical", 500),
            row("NMS", 0.15, "Classical", 500),
            row("NMS", 0.03, "Classical", 25),
            row("NMS", 0.15, "Classical", 25),
        ];
        let s = coverage_series(&rows);
        let keys: Vec<_> = s.iter().map(|p| (p.case.as_str(), p.effect_size, p.data_size)).collect();
        assert_eq!(keys, [("NMS", 0.03, 25), ("NMS", 0.15, 25), ("NMS", 0.15, 500), ("OMS", 0.15, 500)]);
    }

    #[test]
    fn coverage_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row("NMS", 0.15, "BnTmle1p", 25), row("NMS", 0.15, "BnTmle1p", 100)];
        let path = emit(dir.path(), "c", Format::Csv, &rows).unwrap();
        assert_eq!(read_coverage(&path).unwrap(), rows);
    }

    #[test]
    fn unknown_directories_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_report(dir.path(), Format::Csv, true).unwrap_err().exit_code(), 2);
    }
}
