//! CSV datasets with a JSON sidecar describing every column.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use btmle_core::data::{ColumnKind, ColumnValues, Confounder, Dataset, OutcomeKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Confounder,
    Treatment,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

pub const TREATMENT_COLUMN: &str = "A";
pub const OUTCOME_COLUMN: &str = "Y";

impl Schema {
    /// Schema of a dataset as written by [`write_dataset`].
    pub fn of(dataset: &Dataset) -> Schema {
        let mut columns: Vec<ColumnSchema> = dataset
            .confounders()
            .iter()
            .map(|c| ColumnSchema { name: c.name.clone(), kind: c.values.kind(), role: Role::Confounder })
            .collect();
        columns.push(ColumnSchema { name: TREATMENT_COLUMN.into(), kind: ColumnKind::Binary, role: Role::Treatment });
        let kind = match dataset.outcome_kind() {
            OutcomeKind::Binary => ColumnKind::Binary,
            OutcomeKind::Continuous => ColumnKind::Continuous,
        };
        columns.push(ColumnSchema { name: OUTCOME_COLUMN.into(), kind, role: Role::Outcome });
        Schema { columns }
    }

    fn single(&self, role: Role) -> CliResult<&ColumnSchema> {
        let mut it = self.columns.iter().filter(|c| c.role == role);
        match (it.next(), it.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(CliError::Config(format!("schema needs exactly one {role:?} column"))),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let names: BTreeSet<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if names.len() != self.columns.len() {
            return Err(CliError::Config("schema has duplicate column names".into()));
        }
        if self.single(Role::Treatment)?.kind != ColumnKind::Binary {
            return Err(CliError::Config("treatment column must be binary".into()));
        }
        if self.single(Role::Outcome)?.kind == ColumnKind::Categorical {
            return Err(CliError::Config("outcome column must be binary or continuous".into()));
        }
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Schema> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let schema: Schema = serde_json::from_str(&text).map_err(CliError::json(path))?;
        schema.validate()?;
        Ok(schema)
    }
}

fn parse_number(field: &str, column: &str, row: usize) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("column `{column}`, row {row}: `{field}` is not a number")))
}

fn parse_binary(field: &str, column: &str, row: usize) -> CliResult<u8> {
    match parse_number(field, column, row)? {
        0.0 => Ok(0),
        1.0 => Ok(1),
        _ => Err(CliError::Config(format!("column `{column}`, row {row}: `{field}` is not 0/1"))),
    }
}

/// Observed levels in ascending order: numerically when every level is an
/// integer, lexicographically otherwise.
fn sorted_levels(fields: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&str> = fields.iter().map(|s| s.trim()).collect();
    let mut levels: Vec<String> = distinct.into_iter().map(String::from).collect();
    if levels.iter().all(|l| l.parse::<i64>().is_ok()) {
        levels.sort_by_key(|l| l.parse::<i64>().unwrap_or_default());
    }
    levels
}

/// Read a dataset from CSV text using `schema`. Extra CSV columns are
/// ignored.
pub fn read_dataset_from<R: Read>(reader: R, schema: &Schema, origin: &Path) -> CliResult<Dataset> {
    schema.validate()?;
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(CliError::csv(origin))?.clone();
    let index: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| CliError::Config(format!("CSV has no column `{}`", c.name)))
        })
        .collect::<CliResult<_>>()?;
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    for record in rdr.records() {
        let record = record.map_err(CliError::csv(origin))?;
        for (k, &i) in index.iter().enumerate() {
            raw[k].push(record.get(i).unwrap_or_default().to_string());
        }
    }

    let mut confounders = Vec::new();
    let (mut treatment, mut outcome, mut outcome_kind) = (Vec::new(), Vec::new(), OutcomeKind::Binary);
    for (col, fields) in schema.columns.iter().zip(&raw) {
        let name = col.name.as_str();
        match col.role {
            Role::Confounder => {
                let values = match col.kind {
                    ColumnKind::Binary => ColumnValues::Binary(
                        fields.iter().enumerate().map(|(r, f)| parse_binary(f, name, r)).collect::<CliResult<_>>()?,
                    ),
                    ColumnKind::Continuous => ColumnValues::Continuous(
                        fields.iter().enumerate().map(|(r, f)| parse_number(f, name, r)).collect::<CliResult<_>>()?,
                    ),
                    ColumnKind::Categorical => {
                        let levels = sorted_levels(fields);
                        let codes = fields
                            .iter()
                            .map(|f| levels.iter().position(|l| l == f.trim()).unwrap_or_default() as u32)
                            .collect();
                        ColumnValues::Categorical { levels, codes }
                    }
                };
                confounders.push(Confounder::new(name, values));
            }
            Role::Treatment => {
                treatment =
                    fields.iter().enumerate().map(|(r, f)| parse_binary(f, name, r)).collect::<CliResult<_>>()?;
            }
            Role::Outcome => {
                outcome_kind = match col.kind {
                    ColumnKind::Continuous => OutcomeKind::Continuous,
                    _ => OutcomeKind::Binary,
                };
                outcome =
                    fields.iter().enumerate().map(|(r, f)| parse_number(f, name, r)).collect::<CliResult<_>>()?;
            }
        }
    }
    Dataset::new(confounders, treatment, outcome, outcome_kind).map_err(|e| CliError::Config(e.to_string()))
}

pub fn read_dataset(csv_path: &Path, schema_path: &Path) -> CliResult<Dataset> {
    let schema = Schema::read(schema_path)?;
    let file = File::open(csv_path).map_err(CliError::io(csv_path))?;
    read_dataset_from(file, &schema, csv_path)
}

/// Write `dataset` as CSV (confounders, then `A`, then `Y`).
pub fn write_dataset_to<W: Write>(dataset: &Dataset, writer: W, origin: &Path) -> CliResult<()> {
    let schema = Schema::of(dataset);
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(schema.columns.iter().map(|c| c.name.as_str())).map_err(CliError::csv(origin))?;
    let mut record: Vec<String> = Vec::with_capacity(schema.columns.len());
    for i in 0..dataset.n_rows() {
        record.clear();
        for c in dataset.confounders() {
            record.push(match &c.values {
                ColumnValues::Binary(v) => v[i].to_string(),
                ColumnValues::Categorical { levels, codes } => levels[codes[i] as usize].clone(),
                ColumnValues::Continuous(v) => v[i].to_string(),
            });
        }
        record.push(dataset.treatment()[i].to_string());
        record.push(match dataset.outcome_kind() {
            OutcomeKind::Binary => (dataset.outcome()[i] as u8).to_string(),
            OutcomeKind::Continuous => dataset.outcome()[i].to_string(),
        });
        w.write_record(&record).map_err(CliError::csv(origin))?;
    }
    w.flush().map_err(CliError::io(origin))
}

/// Write `dataset` to `csv_path` and its schema to `schema_path`.
pub fn write_dataset(dataset: &Dataset, csv_path: &Path, schema_path: &Path) -> CliResult<()> {
    let file = File::create(csv_path).map_err(CliError::io(csv_path))?;
    write_dataset_to(dataset, std::io::BufWriter::new(file), csv_path)?;
    crate::write_json(schema_path, &Schema::of(dataset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use btmle_core::simgen::{gen_dataset, DgpSpec};

    fn round_trip(dataset: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset_to(dataset, &mut buf, Path::new("mem")).unwrap();
        read_dataset_from(buf.as_slice(), &Schema::of(dataset), Path::new("mem")).unwrap()
    }

    #[test]
    fn simulated_datasets_round_trip_losslessly() {
        for spec in [DgpSpec::binary_case_study(300, 1), DgpSpec::continuous_case_study(300, 2)] {
            let d = gen_dataset(&spec).unwrap();
            assert_eq!(round_trip(&d), d);
        }
    }

    #[test]
    fn categorical_levels_follow_numeric_order() {
        let text = "c,A,Y\n10,0,1\n2,1,0\n10,1,1\n";
        let schema = Schema {
            columns: vec![
                ColumnSchema { name: "c".into(), kind: ColumnKind::Categorical, role: Role::Confounder },
                ColumnSchema { name: "A".into(), kind: ColumnKind::Binary, role: Role::Treatment },
                ColumnSchema { name: "Y".into(), kind: ColumnKind::Binary, role: Role::Outcome },
            ],
        };
        let d = read_dataset_from(text.as_bytes(), &schema, Path::new("mem")).unwrap();
        match &d.confounders()[0].values {
            ColumnValues::Categorical { levels, codes } => {
                assert_eq!(levels, &["2", "10"]);
                assert_eq!(codes, &[1, 0, 1]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_inputs_are_configuration_errors() {
        let schema = Schema {
            columns: vec![
                ColumnSchema { name: "A".into(), kind: ColumnKind::Binary, role: Role::Treatment },
                ColumnSchema { name: "Y".into(), kind: ColumnKind::Binary, role: Role::Outcome },
            ],
        };
        for text in ["A,Y\n2,1\n", "A,Y\n1,x\n", "A\n1\n", "A,Y\n1,0.5\n"] {
            let e = read_dataset_from(text.as_bytes(), &schema, Path::new("mem")).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text:?}: {e}");
        }
        let mut two = schema.clone();
        two.columns[1].role = Role::Treatment;
        assert!(two.validate().is_err());
    }
}
