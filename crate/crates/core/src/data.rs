//! Datasets, model specifications and design-matrix encoding.
//!
//! Encoding is fully described by an [`EncodingMeta`]: reference coding for
//! categorical columns (level 0 dropped), z-scores for continuous columns
//! using training statistics, and optional second-order terms. The same
//! metadata re-encodes new rows without looking at any other data.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::math::sqrt;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OutcomeKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ColumnKind {
    Binary,
    Categorical,
    Continuous,
}

/// Values of one confounder column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Binary(Vec<u8>),
    /// Level indices into `levels`.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
    Continuous(Vec<f64>),
}

impl ColumnValues {
    pub fn len(&self) -> usize {
        match self {
            ColumnValues::Binary(v) => v.len(),
            ColumnValues::Categorical { codes, .. } => codes.len(),
            ColumnValues::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnValues::Binary(_) => ColumnKind::Binary,
            ColumnValues::Categorical { .. } => ColumnKind::Categorical,
            ColumnValues::Continuous(_) => ColumnKind::Continuous,
        }
    }

    /// Numeric value of row `i` (categorical columns yield the level index).
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        match self {
            ColumnValues::Binary(v) => f64::from(v[i]),
            ColumnValues::Categorical { codes, .. } => f64::from(codes[i]),
            ColumnValues::Continuous(v) => v[i],
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnValues {
        match self {
            ColumnValues::Binary(v) => ColumnValues::Binary(rows.iter().map(|&i| v[i]).collect()),
            ColumnValues::Categorical { levels, codes } => ColumnValues::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
            ColumnValues::Continuous(v) => ColumnValues::Continuous(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Confounder {
    pub name: String,
    pub values: ColumnValues,
}

impl Confounder {
    pub fn new(name: impl Into<String>, values: ColumnValues) -> Self {
        Self { name: name.into(), values }
    }
}

/// Confounders, binary treatment and outcome for `d` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    confounders: Vec<Confounder>,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
    outcome_kind: OutcomeKind,
}

impl Dataset {
    pub fn new(
        confounders: Vec<Confounder>,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
        outcome_kind: OutcomeKind,
    ) -> Result<Self> {
        let d = treatment.len();
        if d == 0 {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if outcome.len() != d {
            return Err(Error::InvalidDataset(format!("{} outcomes for {d} treatment values", outcome.len())));
        }
        if let Some(i) = treatment.iter().position(|&a| a > 1) {
            return Err(Error::InvalidDataset(format!("treatment at row {i} is not 0/1")));
        }
        match outcome_kind {
            OutcomeKind::Binary => {
                if let Some(i) = outcome.iter().position(|&y| y != 0.0 && y != 1.0) {
                    return Err(Error::InvalidDataset(format!("binary outcome at row {i} is not 0/1")));
                }
            }
            OutcomeKind::Continuous => {
                if let Some(i) = outcome.iter().position(|y| !y.is_finite()) {
                    return Err(Error::InvalidDataset(format!("outcome at row {i} is not finite")));
                }
            }
        }
        for c in &confounders {
            if c.values.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "column `{}` has {} rows, expected {d}",
                    c.name,
                    c.values.len()
                )));
            }
            match &c.values {
                ColumnValues::Binary(v) => {
                    if v.iter().any(|&x| x > 1) {
                        return Err(Error::InvalidDataset(format!("binary column `{}` is not 0/1", c.name)));
                    }
                }
                ColumnValues::Categorical { levels, codes } => {
                    if levels.is_empty() {
                        return Err(Error::InvalidDataset(format!("categorical column `{}` has no levels", c.name)));
                    }
                    if codes.iter().any(|&k| k as usize >= levels.len()) {
                        return Err(Error::InvalidDataset(format!(
                            "categorical column `{}` has a code outside 0..{}",
                            c.name,
                            levels.len()
                        )));
                    }
                }
                ColumnValues::Continuous(v) => {
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidDataset(format!("column `{}` has non-finite values", c.name)));
                    }
                }
            }
        }
        Ok(Self { confounders, treatment, outcome, outcome_kind })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.treatment.len()
    }

    pub fn confounders(&self) -> &[Confounder] {
        &self.confounders
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    /// Number of treated units.
    pub fn n_treated(&self) -> usize {
        self.treatment.iter().filter(|&&a| a == 1).count()
    }

    /// Errors unless both treatment arms are present.
    pub fn require_both_arms(&self) -> Result<()> {
        let t = self.n_treated();
        if t == 0 || t == self.n_rows() {
            Err(Error::SingleArm)
        } else {
            Ok(())
        }
    }

    /// Raw confounder values of row `i`, categorical columns as level index.
    pub fn raw_row(&self, i: usize) -> Vec<f64> {
        self.confounders.iter().map(|c| c.values.value(i)).collect()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        Dataset::new(
            self.confounders
                .iter()
                .map(|c| Confounder { name: c.name.clone(), values: c.values.select(rows) })
                .collect(),
            rows.iter().map(|&i| self.treatment[i]).collect(),
            rows.iter().map(|&i| self.outcome[i]).collect(),
            self.outcome_kind,
        )
    }

    /// Centering and scaling applied to the outcome before fitting.
    /// Binary outcomes are left untouched.
    pub fn outcome_scale(&self) -> Result<OutcomeScale> {
        match self.outcome_kind {
            OutcomeKind::Binary => Ok(OutcomeScale::IDENTITY),
            OutcomeKind::Continuous => {
                let (center, scale) = mean_sd(&self.outcome);
                if scale <= 0.0 || !scale.is_finite() {
                    return Err(Error::DegenerateColumn("outcome".into()));
                }
                Ok(OutcomeScale { center, scale })
            }
        }
    }

    /// The outcome on the scale models are fitted on.
    pub fn fitting_outcome(&self) -> Result<(Vec<f64>, OutcomeScale)> {
        let s = self.outcome_scale()?;
        Ok((self.outcome.iter().map(|&y| s.standardize(y)).collect(), s))
    }
}

/// Affine map between the original outcome scale and the fitting scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeScale {
    pub center: f64,
    pub scale: f64,
}

impl OutcomeScale {
    pub const IDENTITY: OutcomeScale = OutcomeScale { center: 0.0, scale: 1.0 };

    #[inline]
    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.center) / self.scale
    }

    #[inline]
    pub fn restore(&self, z: f64) -> f64 {
        self.center + self.scale * z
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, sqrt(ss / (n - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelOrder {
    FirstOrder,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelRole {
    Outcome,
    Propensity,
}

/// Model structure and prior scales for the outcome or propensity model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub order: ModelOrder,
    pub role: ModelRole,
    /// Standard deviation of the zero-mean Gaussian prior on coefficients.
    pub prior_scale: f64,
    /// Half-normal scale for the residual sd (continuous outcomes only).
    pub error_sd_prior_scale: f64,
}

impl ModelSpec {
    pub fn new(role: ModelRole, order: ModelOrder) -> Self {
        Self { order, role, prior_scale: 1.0, error_sd_prior_scale: 1.0 }
    }

    pub fn outcome(order: ModelOrder) -> Self {
        Self::new(ModelRole::Outcome, order)
    }

    pub fn propensity(order: ModelOrder) -> Self {
        Self::new(ModelRole::Propensity, order)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prior_scale > 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::InvalidConfig("prior_scale must be positive".into()));
        }
        if !(self.error_sd_prior_scale > 0.0 && self.error_sd_prior_scale.is_finite()) {
            return Err(Error::InvalidConfig("error_sd_prior_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome and propensity specifications for one TMLE fit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TmleSpecs {
    pub outcome: ModelSpec,
    pub propensity: ModelSpec,
}

impl TmleSpecs {
    pub fn new(outcome_order: ModelOrder, propensity_order: ModelOrder) -> Self {
        Self { outcome: ModelSpec::outcome(outcome_order), propensity: ModelSpec::propensity(propensity_order) }
    }

    pub fn first_order() -> Self {
        Self::new(ModelOrder::FirstOrder, ModelOrder::FirstOrder)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcome.role != ModelRole::Outcome || self.propensity.role != ModelRole::Propensity {
            return Err(Error::InvalidConfig("model specs have swapped roles".into()));
        }
        self.outcome.validate()?;
        self.propensity.validate()
    }
}

impl Default for TmleSpecs {
    fn default() -> Self {
        Self::first_order()
    }
}

/// How one source column is turned into design columns.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ColumnEncoding {
    Binary { name: String },
    /// Indicators for levels `1..n_levels`.
    Categorical { name: String, n_levels: u32 },
    Continuous { name: String, mean: f64, scale: f64 },
}

impl ColumnEncoding {
    pub fn name(&self) -> &str {
        match self {
            ColumnEncoding::Binary { name }
            | ColumnEncoding::Categorical { name, .. }
            | ColumnEncoding::Continuous { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnEncoding::Categorical { n_levels, .. } => n_levels.saturating_sub(1) as usize,
            _ => 1,
        }
    }
}

/// Everything needed to reproduce a design matrix from raw rows.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncodingMeta {
    pub order: ModelOrder,
    pub includes_treatment: bool,
    pub columns: Vec<ColumnEncoding>,
}

impl EncodingMeta {
    /// Learn the encoding from a dataset.
    pub fn fit(dataset: &Dataset, spec: &ModelSpec) -> Result<Self> {
        let mut columns = Vec::with_capacity(dataset.confounders.len());
        for c in &dataset.confounders {
            let enc = match &c.values {
                ColumnValues::Binary(_) => ColumnEncoding::Binary { name: c.name.clone() },
                ColumnValues::Categorical { levels, .. } => {
                    ColumnEncoding::Categorical { name: c.name.clone(), n_levels: levels.len() as u32 }
                }
                ColumnValues::Continuous(v) => {
                    let (mean, scale) = mean_sd(v);
                    if !(scale > 0.0) {
                        return Err(Error::DegenerateColumn(c.name.clone()));
                    }
                    ColumnEncoding::Continuous { name: c.name.clone(), mean, scale }
                }
            };
            columns.push(enc);
        }
        Ok(Self { order: spec.order, includes_treatment: spec.role == ModelRole::Outcome, columns })
    }

    /// Number of raw values expected per row: one per source column, plus the
    /// treatment when it is part of the design.
    pub fn raw_width(&self) -> usize {
        self.columns.len() + usize::from(self.includes_treatment)
    }

    /// Index of the treatment column in the design, if any.
    pub fn treatment_column(&self) -> Option<usize> {
        self.includes_treatment.then_some(1)
    }

    /// Design column names, in order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        if self.includes_treatment {
            names.push("treatment".to_string());
        }
        let mut sources = Vec::new();
        for (s, c) in self.columns.iter().enumerate() {
            match c {
                ColumnEncoding::Categorical { name, n_levels } => {
                    for l in 1..*n_levels {
                        names.push(format!("{name}[{l}]"));
                        sources.push((s, names.len() - 1));
                    }
                }
                other => {
                    names.push(other.name().to_string());
                    sources.push((s, names.len() - 1));
                }
            }
        }
        if self.order == ModelOrder::SecondOrder {
            for c in &self.columns {
                if let ColumnEncoding::Continuous { name, .. } = c {
                    names.push(format!("{name}^2"));
                }
            }
            for i in 0..sources.len() {
                for j in (i + 1)..sources.len() {
                    if sources[i].0 != sources[j].0 {
                        let n = format!("{}*{}", names[sources[i].1], names[sources[j].1]);
                        names.push(n);
                    }
                }
            }
        }
        names
    }

    /// Number of design columns.
    pub fn width(&self) -> usize {
        let base: usize = self.columns.iter().map(ColumnEncoding::width).sum();
        let mut q = 1 + usize::from(self.includes_treatment) + base;
        if self.order == ModelOrder::SecondOrder {
            q += self.columns.iter().filter(|c| matches!(c, ColumnEncoding::Continuous { .. })).count();
            let widths: Vec<usize> = self.columns.iter().map(ColumnEncoding::width).collect();
            for i in 0..widths.len() {
                for j in (i + 1)..widths.len() {
                    q += widths[i] * widths[j];
                }
            }
        }
        q
    }

    /// Encode one raw row into `out` (length [`EncodingMeta::width`]).
    pub fn encode_row(&self, raw: &[f64], out: &mut Vec<f64>) -> Result<()> {
        if raw.len() != self.raw_width() {
            return Err(Error::Schema(format!("row has {} values, expected {}", raw.len(), self.raw_width())));
        }
        out.clear();
        out.push(1.0);
        let (treatment, values) = if self.includes_treatment {
            let a = raw[self.columns.len()];
            if a != 0.0 && a != 1.0 {
                return Err(Error::Encoding(format!("treatment value {a} is not 0/1")));
            }
            (Some(a), &raw[..self.columns.len()])
        } else {
            (None, raw)
        };
        if let Some(a) = treatment {
            out.push(a);
        }
        let start = out.len();
        // (source index, first design column, width)
        let mut blocks: Vec<(usize, usize, usize)> = Vec::with_capacity(self.columns.len());
        for (s, (c, &x)) in self.columns.iter().zip(values).enumerate() {
            let first = out.len();
            match c {
                ColumnEncoding::Binary { name } => {
                    if x != 0.0 && x != 1.0 {
                        return Err(Error::Encoding(format!("`{name}`: value {x} is not 0/1")));
                    }
                    out.push(x);
                }
                ColumnEncoding::Categorical { name, n_levels } => {
                    if x < 0.0 || x != crate::math::floor(x) || x >= f64::from(*n_levels) {
                        return Err(Error::Encoding(format!(
                            "`{name}`: level {x} not among the {n_levels} training levels"
                        )));
                    }
                    for l in 1..*n_levels {
                        out.push(if x == f64::from(l) { 1.0 } else { 0.0 });
                    }
                }
                ColumnEncoding::Continuous { name, mean, scale } => {
                    if !x.is_finite() {
                        return Err(Error::Encoding(format!("`{name}`: non-finite value")));
                    }
                    out.push((x - mean) / scale);
                }
            }
            blocks.push((s, first, out.len() - first));
        }
        let end = out.len();
        if self.order == ModelOrder::SecondOrder {
            for (c, &(_, first, _)) in self.columns.iter().zip(&blocks) {
                if let ColumnEncoding::Continuous { .. } = c {
                    let z = out[first];
                    out.push(z * z);
                }
            }
            let src: Vec<usize> = (start..end)
                .map(|col| blocks.iter().find(|b| col >= b.1 && col < b.1 + b.2).map_or(0, |b| b.0))
                .collect();
            for i in start..end {
                for j in (i + 1)..end {
                    if src[i - start] != src[j - start] {
                        let v = out[i] * out[j];
                        out.push(v);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Encoded feature matrix plus the metadata that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Matrix,
    pub column_names: Vec<String>,
    pub meta: EncodingMeta,
}

impl DesignMatrix {
    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn includes_treatment(&self) -> bool {
        self.meta.includes_treatment
    }

    /// Copy with the treatment column forced to `a` for every row.
    pub fn with_treatment(&self, a: u8) -> Result<DesignMatrix> {
        let col = self
            .meta
            .treatment_column()
            .ok_or_else(|| Error::Schema("design has no treatment column".into()))?;
        let mut out = self.clone();
        for r in 0..out.values.rows() {
            out.values.set(r, col, f64::from(a));
        }
        Ok(out)
    }
}

/// Encode `dataset` for the model described by `spec`. Outcome models get
/// the observed treatment as their second column.
pub fn build_design(dataset: &Dataset, spec: &ModelSpec) -> Result<DesignMatrix> {
    let meta = EncodingMeta::fit(dataset, spec)?;
    let rows = raw_rows(dataset, meta.includes_treatment, None);
    apply_design(&rows, &meta)
}

/// Encode `dataset` with a previously learned encoding. When the encoding
/// includes the treatment and `treatment` is given, it replaces the observed
/// treatment for every row.
pub fn encode_dataset(dataset: &Dataset, meta: &EncodingMeta, treatment: Option<u8>) -> Result<DesignMatrix> {
    let rows = raw_rows(dataset, meta.includes_treatment, treatment);
    apply_design(&rows, meta)
}

fn raw_rows(dataset: &Dataset, with_treatment: bool, forced: Option<u8>) -> Vec<Vec<f64>> {
    (0..dataset.n_rows())
        .map(|i| {
            let mut r = dataset.raw_row(i);
            if with_treatment {
                r.push(f64::from(forced.unwrap_or(dataset.treatment[i])));
            }
            r
        })
        .collect()
}

/// Encode raw rows (source columns in encoding order, then the treatment if
/// the encoding includes it) using stored statistics only.
pub fn apply_design(raw_rows: &[Vec<f64>], meta: &EncodingMeta) -> Result<DesignMatrix> {
    let q = meta.width();
    let mut data = Vec::with_capacity(raw_rows.len() * q);
    let mut buf = Vec::with_capacity(q);
    for (i, r) in raw_rows.iter().enumerate() {
        meta.encode_row(r, &mut buf).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("row {i}: {m}")),
            Error::Encoding(m) => Error::Encoding(format!("row {i}: {m}")),
            other => other,
        })?;
        debug_assert_eq!(buf.len(), q);
        data.extend_from_slice(&buf);
    }
    Ok(DesignMatrix { values: Matrix::from_vec(raw_rows.len(), q, data)?, column_names: meta.column_names(), meta: meta.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy() -> Dataset {
        Dataset::new(
            vec![
                Confounder::new("X1", ColumnValues::Binary(vec![0, 1, 0, 1, 0])),
                Confounder::new(
                    "X2",
                    ColumnValues::Categorical {
                        levels: vec!["0".into(), "1".into(), "2".into()],
                        codes: vec![0, 1, 2, 1, 0],
                    },
                ),
                Confounder::new("X3", ColumnValues::Continuous(vec![-1.0, 0.0, 1.0, 2.0, 3.0])),
            ],
            vec![0, 1, 1, 0, 1],
            vec![0.0, 1.0, 1.0, 0.0, 0.0],
            OutcomeKind::Binary,
        )
        .unwrap()
    }

    #[test]
    fn reference_coding_of_three_levels() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap();
        assert_eq!(x.cols(), 5);
        assert_eq!(x.column_names, vec!["intercept", "X1", "X2[1]", "X2[2]", "X3"]);
        // X2 codes 0,1,2,1,0 → indicator pairs by hand
        let expect = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 0.0]];
        for (r, e) in expect.iter().enumerate() {
            assert_eq!(&x.values.row(r)[2..4], e);
        }
    }

    #[test]
    fn all_zero_row_encodes_to_intercept_and_zscore() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap();
        // X3 mean 1, sample sd sqrt(2.5)
        let z3 = (-1.0 - 1.0) / sqrt(2.5);
        assert_eq!(x.values.row(0), &[1.0, 0.0, 0.0, 0.0, z3]);
    }

    #[test]
    fn outcome_design_carries_treatment_second() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::outcome(ModelOrder::FirstOrder)).unwrap();
        assert_eq!(x.cols(), 6);
        assert_eq!(x.values.column(1), vec![0.0, 1.0, 1.0, 0.0, 1.0]);
        let forced = x.with_treatment(1).unwrap();
        assert!(forced.values.column(1).iter().all(|&a| a == 1.0));
    }

    #[test]
    fn second_order_adds_squares_and_cross_products() {
        let d = toy();
        let first = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap();
        let second = build_design(&d, &ModelSpec::propensity(ModelOrder::SecondOrder)).unwrap();
        // 4 encoded columns; cross products skip the X2 indicator pair: 6 - 1 = 5
        assert_eq!(second.cols(), first.cols() + 1 + 5);
        assert_eq!(second.meta.width(), second.cols());
        assert_eq!(second.column_names.len(), second.cols());
        for name in &first.column_names {
            assert!(second.column_names.contains(name));
        }
        let r = second.values.row(2);
        let z3 = r[4];
        assert_eq!(r[5], z3 * z3);
    }

    #[test]
    fn apply_design_reproduces_build_design() {
        let d = toy();
        let spec = ModelSpec::outcome(ModelOrder::SecondOrder);
        let x = build_design(&d, &spec).unwrap();
        let y = encode_dataset(&d, &x.meta, None).unwrap();
        assert_eq!(x, y);
        assert_eq!(build_design(&d, &spec).unwrap(), x);
    }

    #[test]
    fn apply_design_encodes_new_row_by_hand() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::outcome(ModelOrder::FirstOrder)).unwrap();
        let row = vec![1.0, 2.0, 2.5, 1.0];
        let enc = apply_design(&[row], &x.meta).unwrap();
        let z = (2.5 - 1.0) / sqrt(2.5);
        assert_eq!(enc.values.row(0), &[1.0, 1.0, 1.0, 0.0, 1.0, z]);
    }

    #[test]
    fn unseen_level_is_an_encoding_error() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap();
        let err = apply_design(&[vec![0.0, 3.0, 0.0]], &x.meta).unwrap_err();
        assert!(matches!(err, Error::Encoding(_)));
        let err = apply_design(&[vec![0.0, 1.0]], &x.meta).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn zero_variance_continuous_column_is_rejected() {
        let d = Dataset::new(
            vec![Confounder::new("X3", ColumnValues::Continuous(vec![2.0; 4]))],
            vec![0, 1, 0, 1],
            vec![0.0, 1.0, 0.0, 1.0],
            OutcomeKind::Binary,
        )
        .unwrap();
        let err = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap_err();
        assert_eq!(err, Error::DegenerateColumn("X3".into()));
    }

    #[test]
    fn invalid_datasets_are_rejected() {
        let bad_treatment = Dataset::new(vec![], vec![0, 2], vec![0.0, 1.0], OutcomeKind::Binary);
        assert!(bad_treatment.is_err());
        let bad_outcome = Dataset::new(vec![], vec![0, 1], vec![0.0, 0.5], OutcomeKind::Binary);
        assert!(bad_outcome.is_err());
        let ragged = Dataset::new(vec![], vec![0, 1], vec![0.0], OutcomeKind::Binary);
        assert!(ragged.is_err());
        let empty = Dataset::new(vec![], vec![], vec![], OutcomeKind::Continuous);
        assert!(empty.is_err());
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_sd() {
        let d = toy();
        let x = build_design(&d, &ModelSpec::propensity(ModelOrder::FirstOrder)).unwrap();
        let z = x.values.column(4);
        assert!(crate::stats::mean(&z).abs() < 1e-10);
        assert!((crate::stats::sd(&z) - 1.0).abs() < 1e-10);
    }
}
