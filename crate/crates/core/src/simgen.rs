//! Seeded synthetic data: three confounders, a logistic treatment and a
//! binary or continuous outcome with an additive treatment effect.
//!
//! Each generator reads its own random stream of the seed (confounders 1,
//! treatment 2, outcome 3, label noise 4), so toggling noise or changing the
//! outcome never alters the confounders or treatment that were drawn.

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ColumnValues, Confounder, Dataset, ModelOrder, OutcomeKind};
use crate::math::expit;
use crate::rng::stream_rng;
use crate::{Error, Result};

const STREAM_CONFOUNDERS: u64 = 1;
const STREAM_TREATMENT: u64 = 2;
const STREAM_OUTCOME: u64 = 3;
const STREAM_NOISE: u64 = 4;

/// Residual sd of the continuous outcome.
pub const CONTINUOUS_NOISE_SD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DgpSpec {
    pub n: usize,
    pub effect_size: f64,
    pub outcome_kind: OutcomeKind,
    pub treatment_order: ModelOrder,
    pub outcome_order: ModelOrder,
    /// Label-flip probability, binary outcomes only.
    pub label_noise: f64,
    pub seed: u64,
}

impl DgpSpec {
    /// The binary case-study design: ψ = 0.03, 5% label noise, second-order
    /// outcome and first-order treatment.
    pub fn binary_case_study(n: usize, seed: u64) -> Self {
        Self {
            n,
            effect_size: 0.03,
            outcome_kind: OutcomeKind::Binary,
            treatment_order: ModelOrder::FirstOrder,
            outcome_order: ModelOrder::SecondOrder,
            label_noise: 0.05,
            seed,
        }
    }

    /// The continuous case-study design: ψ = 0.25.
    pub fn continuous_case_study(n: usize, seed: u64) -> Self {
        Self {
            n,
            effect_size: 0.25,
            outcome_kind: OutcomeKind::Continuous,
            treatment_order: ModelOrder::FirstOrder,
            outcome_order: ModelOrder::SecondOrder,
            label_noise: 0.0,
            seed,
        }
    }

    /// Binary design for a misspecification case.
    pub fn binary_case(case: MisspecCase, n: usize, effect_size: f64, seed: u64, literal: bool) -> Self {
        let (treatment_order, outcome_order) = case.orders(literal);
        Self {
            n,
            effect_size,
            outcome_kind: OutcomeKind::Binary,
            treatment_order,
            outcome_order,
            label_noise: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !self.effect_size.is_finite() {
            return Err(Error::InvalidConfig("effect size must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label noise must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Which models are misspecified relative to the data-generating process
/// when both are fitted with first-order terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MisspecCase {
    /// Neither model misspecified.
    #[cfg_attr(feature = "serde", serde(rename = "NMS"))]
    Nms,
    /// Outcome model misspecified.
    #[cfg_attr(feature = "serde", serde(rename = "OMS"))]
    Oms,
    /// Outcome and propensity models misspecified.
    #[cfg_attr(feature = "serde", serde(rename = "OPMS"))]
    Opms,
}

impl MisspecCase {
    pub const ALL: [MisspecCase; 3] = [MisspecCase::Nms, MisspecCase::Oms, MisspecCase::Opms];

    /// `(treatment order, outcome order)` of the generating process. With
    /// `literal`, the both-misspecified case pairs a second-order treatment
    /// with a first-order outcome.
    pub fn orders(self, literal: bool) -> (ModelOrder, ModelOrder) {
        use ModelOrder::{FirstOrder, SecondOrder};
        match self {
            MisspecCase::Nms => (FirstOrder, FirstOrder),
            MisspecCase::Oms => (FirstOrder, SecondOrder),
            MisspecCase::Opms if literal => (SecondOrder, FirstOrder),
            MisspecCase::Opms => (SecondOrder, SecondOrder),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            MisspecCase::Nms => "NMS",
            MisspecCase::Oms => "OMS",
            MisspecCase::Opms => "OPMS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NMS" => Some(MisspecCase::Nms),
            "OMS" => Some(MisspecCase::Oms),
            "OPMS" => Some(MisspecCase::Opms),
            _ => None,
        }
    }
}

/// Raw confounders with `X2` as its integer level.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfounders {
    pub x1: Vec<u8>,
    pub x2: Vec<u8>,
    pub x3: Vec<f64>,
}

impl RawConfounders {
    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    fn row(&self, i: usize) -> (f64, f64, f64) {
        (f64::from(self.x1[i]), f64::from(self.x2[i]), self.x3[i])
    }
}

pub fn gen_confounders(n: usize, seed: u64) -> RawConfounders {
    let mut rng = stream_rng(seed, STREAM_CONFOUNDERS);
    let mut c = RawConfounders { x1: Vec::with_capacity(n), x2: Vec::with_capacity(n), x3: Vec::with_capacity(n) };
    for _ in 0..n {
        c.x1.push(u8::from(rng.random::<f64>() < 0.4));
        let u: f64 = rng.random();
        c.x2.push(if u < 0.3 {
            0
        } else if u < 0.8 {
            1
        } else {
            2
        });
        c.x3.push(StandardNormal.sample(&mut rng));
    }
    c
}

fn second_order_terms(x1: f64, x2: f64, x3: f64) -> f64 {
    0.07 * x3 * x3 - 0.02 * x1 * x2 + 0.06 * x2 * x3
}

/// Treatment log-odds at raw confounder values.
pub fn treatment_logit(order: ModelOrder, x1: f64, x2: f64, x3: f64) -> f64 {
    let base = -1.4 + 0.3 * x1 + 0.5 * x2 - 0.9 * x3;
    match order {
        ModelOrder::FirstOrder => base,
        ModelOrder::SecondOrder => base + second_order_terms(x1, x2, x3),
    }
}

/// Control-arm outcome index: log-odds for binary outcomes, the mean for
/// continuous ones.
pub fn outcome_index(order: ModelOrder, x1: f64, x2: f64, x3: f64) -> f64 {
    let base = -1.3 - 0.7 * x1 + 0.8 * x2 + 0.9 * x3;
    match order {
        ModelOrder::FirstOrder => base,
        ModelOrder::SecondOrder => base + second_order_terms(x1, x2, x3),
    }
}

pub fn gen_treatment(conf: &RawConfounders, order: ModelOrder, seed: u64) -> Vec<u8> {
    let mut rng = stream_rng(seed, STREAM_TREATMENT);
    (0..conf.len())
        .map(|i| {
            let (x1, x2, x3) = conf.row(i);
            u8::from(rng.random::<f64>() < expit(treatment_logit(order, x1, x2, x3)))
        })
        .collect()
}

/// Binary outcomes with bookkeeping of clamped probabilities and flipped labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOutcome {
    pub y: Vec<f64>,
    pub clamped: usize,
    pub flipped: usize,
}

pub fn gen_outcome_binary(
    conf: &RawConfounders,
    treatment: &[u8],
    psi: f64,
    order: ModelOrder,
    noise: f64,
    seed: u64,
) -> BinaryOutcome {
    let mut rng = stream_rng(seed, STREAM_OUTCOME);
    let mut flip_rng = stream_rng(seed, STREAM_NOISE);
    let mut out = BinaryOutcome { y: Vec::with_capacity(conf.len()), clamped: 0, flipped: 0 };
    for (i, &a) in treatment.iter().enumerate().take(conf.len()) {
        let (x1, x2, x3) = conf.row(i);
        let p0 = expit(outcome_index(order, x1, x2, x3));
        let raw1 = p0 + psi;
        let p1 = raw1.clamp(0.0, 1.0);
        if p1 != raw1 {
            out.clamped += 1;
        }
        let p = if a == 1 { p1 } else { p0 };
        let mut y = rng.random::<f64>() < p;
        if flip_rng.random::<f64>() < noise {
            y = !y;
            out.flipped += 1;
        }
        out.y.push(f64::from(u8::from(y)));
    }
    out
}

pub fn gen_outcome_continuous(conf: &RawConfounders, treatment: &[u8], psi: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_OUTCOME);
    (0..conf.len())
        .map(|i| {
            let (x1, x2, x3) = conf.row(i);
            let y0 = outcome_index(ModelOrder::SecondOrder, x1, x2, x3);
            let mean = y0 + psi * f64::from(treatment[i]);
            let z: f64 = StandardNormal.sample(&mut rng);
            mean + CONTINUOUS_NOISE_SD * z
        })
        .collect()
}

/// A generated dataset with generator bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    pub clamped: usize,
    pub flipped: usize,
}

/// Turn raw confounders into dataset columns. `X2` levels are the observed
/// values in increasing order, so small samples missing a level still get
/// contiguous codes.
pub fn confounder_columns(conf: &RawConfounders) -> Vec<Confounder> {
    let mut seen = [false; 3];
    for &v in &conf.x2 {
        seen[usize::from(v)] = true;
    }
    let levels: Vec<u8> = (0..3u8).filter(|&l| seen[usize::from(l)]).collect();
    let codes = conf.x2.iter().map(|v| levels.iter().position(|l| l == v).unwrap_or(0) as u32).collect();
    alloc::vec![
        Confounder::new("X1", ColumnValues::Binary(conf.x1.clone())),
        Confounder::new(
            "X2",
            ColumnValues::Categorical { levels: levels.iter().map(|l| l.to_string()).collect(), codes },
        ),
        Confounder::new("X3", ColumnValues::Continuous(conf.x3.clone())),
    ]
}

pub fn generate(spec: &DgpSpec) -> Result<Generated> {
    spec.validate()?;
    let conf = gen_confounders(spec.n, spec.seed);
    let a = gen_treatment(&conf, spec.treatment_order, spec.seed);
    let (y, clamped, flipped) = match spec.outcome_kind {
        OutcomeKind::Binary => {
            let o = gen_outcome_binary(&conf, &a, spec.effect_size, spec.outcome_order, spec.label_noise, spec.seed);
            (o.y, o.clamped, o.flipped)
        }
        OutcomeKind::Continuous => (gen_outcome_continuous(&conf, &a, spec.effect_size, spec.seed), 0, 0),
    };
    let dataset = Dataset::new(confounder_columns(&conf), a, y, spec.outcome_kind)?;
    dataset.require_both_arms()?;
    Ok(Generated { dataset, clamped, flipped })
}

pub fn gen_dataset(spec: &DgpSpec) -> Result<Dataset> {
    generate(spec).map(|g| g.dataset)
}
