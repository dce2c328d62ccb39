//! NUTS sampling of a [`LogDensity`] with warmup adaptation.
//!
//! Chains are independent: chain `c` draws everything, including its
//! starting point, from stream `c` of the configured seed. With the `std`
//! feature the chains run on scoped threads; results are identical either
//! way because they are merged by chain index.

mod adapt;
mod nuts;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

pub use adapt::{DualAveraging, MetricWindows};
pub use nuts::{Nuts, Point, TransitionStats, MAX_DELTA_H};

use crate::draws::{ChainStats, PosteriorDraws, RHAT_THRESHOLD};
use crate::glm::LogDensity;
use crate::rng::{mix64, stream_rng, ChaCha20Rng};
use crate::{Error, Result};

/// Sampler settings. The defaults give 2 × 2000 post-warmup draws.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    /// Divergent-transition fraction above which a warning is attached.
    pub max_divergence_fraction: f64,
    /// Run chains on separate threads when the `std` feature is enabled.
    pub parallel_chains: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 2,
            n_warmup: 1000,
            n_draws: 2000,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
            max_divergence_fraction: 0.1,
            parallel_chains: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_draws == 0 || self.max_tree_depth == 0 {
            return Err(Error::InvalidConfig("chain, draw and tree-depth counts must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidConfig("target_accept must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Same settings with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Total post-warmup draws `m`.
    pub fn total_draws(&self) -> usize {
        self.n_chains * self.n_draws
    }
}

/// Number of jittered starting points tried before giving up.
pub const MAX_INIT_ATTEMPTS: usize = 100;

fn chain_rng(seed: u64, chain: usize) -> ChaCha20Rng {
    stream_rng(mix64(seed), chain as u64)
}

fn uniform_point(rng: &mut ChaCha20Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..=2.0)).collect()
}

/// Starting point of chain `chain`: every unconstrained coordinate uniform
/// on `[-2, 2]`.
pub fn initialize<M: LogDensity + ?Sized>(model: &M, seed: u64, chain: usize) -> Vec<f64> {
    uniform_point(&mut chain_rng(seed, chain), model.dim())
}

/// Which blocks of the model to keep in the returned draws.
#[derive(Debug, Clone, Copy)]
pub enum Keep<'a> {
    All,
    Only(&'a [&'a str]),
}

struct ChainOutput {
    /// Kept coordinates, draw-major.
    draws: Vec<f64>,
    stats: ChainStats,
}

fn run_chain<M: LogDensity + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    chain: usize,
    kept: &[(usize, usize)],
    stage: &str,
) -> Result<ChainOutput> {
    let dim = model.dim();
    let mut rng = chain_rng(cfg.seed, chain);
    let mut z = None;
    for _ in 0..MAX_INIT_ATTEMPTS {
        let cand = Point::new(model, uniform_point(&mut rng, dim));
        if cand.is_finite() {
            z = Some(cand);
            break;
        }
    }
    let mut z = z.ok_or(Error::Initialization { chain, attempts: MAX_INIT_ATTEMPTS })?;

    let mut nuts = Nuts::new(model, cfg.max_tree_depth);
    nuts.find_reasonable_step_size(&z, &mut rng);
    let mut da = DualAveraging::new(cfg.target_accept);
    da.restart(nuts.step_size);
    let mut windows = MetricWindows::new(cfg.n_warmup, dim);

    for _ in 0..cfg.n_warmup {
        let t = nuts.transition(&mut z, &mut rng);
        nuts.step_size = da.learn(t.accept_stat);
        if let Some(inv_metric) = windows.observe(&z.q) {
            nuts.inv_metric = inv_metric;
            nuts.find_reasonable_step_size(&z, &mut rng);
            da.restart(nuts.step_size);
        }
    }
    if cfg.n_warmup > 0 {
        nuts.step_size = da.final_step_size();
    }

    let width: usize = kept.iter().map(|k| k.1).sum();
    let mut draws = Vec::with_capacity(cfg.n_draws * width);
    let mut accept_sum = 0.0;
    let mut divergences = 0;
    let mut max_depth_hits = 0;
    let log_blocks: Vec<(usize, usize)> = model
        .layout()
        .blocks()
        .iter()
        .filter(|b| b.transform == crate::glm::Transform::Log)
        .map(|b| (b.offset, b.len))
        .collect();
    for _ in 0..cfg.n_draws {
        let t = nuts.transition(&mut z, &mut rng);
        accept_sum += t.accept_stat;
        divergences += usize::from(t.divergent);
        max_depth_hits += usize::from(t.depth >= cfg.max_tree_depth);
        for &(off, len) in kept {
            for k in off..off + len {
                let is_log = log_blocks.iter().any(|&(o, l)| k >= o && k < o + l);
                draws.push(if is_log { crate::math::exp(z.q[k]) } else { z.q[k] });
            }
        }
    }
    Ok(ChainOutput {
        draws,
        stats: ChainStats {
            stage: String::from(stage),
            chain,
            step_size: nuts.step_size,
            mean_accept: accept_sum / cfg.n_draws as f64,
            divergences,
            max_depth_hits,
            n_draws: cfg.n_draws,
        },
    })
}

#[cfg(feature = "std")]
fn run_chains<M: LogDensity + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    kept: &[(usize, usize)],
    stage: &str,
) -> Vec<Result<ChainOutput>> {
    if !cfg.parallel_chains || cfg.n_chains == 1 {
        return (0..cfg.n_chains).map(|c| run_chain(model, cfg, c, kept, stage)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> =
            (0..cfg.n_chains).map(|c| s.spawn(move || run_chain(model, cfg, c, kept, stage))).collect();
        handles.into_iter().map(|h| h.join().expect("sampler chain panicked")).collect()
    })
}

#[cfg(not(feature = "std"))]
fn run_chains<M: LogDensity + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    kept: &[(usize, usize)],
    stage: &str,
) -> Vec<Result<ChainOutput>> {
    (0..cfg.n_chains).map(|c| run_chain(model, cfg, c, kept, stage)).collect()
}

/// Sample every block of `model`.
pub fn sample<M: LogDensity + ?Sized>(model: &M, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    sample_blocks(model, cfg, "posterior", Keep::All)
}

/// Sample `model` and return the requested blocks on their natural scale.
/// Chain statistics are labelled with `stage`.
pub fn sample_blocks<M: LogDensity + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    stage: &str,
    keep: Keep<'_>,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let layout = model.layout();
    let specs: Vec<_> = match keep {
        Keep::All => layout.blocks().iter().collect(),
        Keep::Only(names) => {
            let mut v = Vec::new();
            for n in names {
                v.push(layout.find(n).ok_or_else(|| Error::MissingBlock((*n).into()))?);
            }
            v
        }
    };
    let kept: Vec<(usize, usize)> = specs.iter().map(|b| (b.offset, b.len)).collect();
    let width: usize = kept.iter().map(|k| k.1).sum();

    let mut outputs = Vec::with_capacity(cfg.n_chains);
    for r in run_chains(model, cfg, &kept, stage) {
        outputs.push(r?);
    }

    let mut out = PosteriorDraws::new(cfg.n_chains, cfg.n_draws);
    let mut col = 0;
    for spec in &specs {
        let mut values = Vec::with_capacity(cfg.total_draws() * spec.len);
        for o in &outputs {
            for j in 0..cfg.n_draws {
                let row = &o.draws[j * width..(j + 1) * width];
                values.extend_from_slice(&row[col..col + spec.len]);
            }
        }
        out.insert(&spec.name, spec.len, values)?;
        col += spec.len;
    }

    let total_div: usize = outputs.iter().map(|o| o.stats.divergences).sum();
    let frac = total_div as f64 / cfg.total_draws() as f64;
    if frac > cfg.max_divergence_fraction {
        out.diagnostics.warnings.push(format!(
            "{stage}: {:.1}% of transitions diverged",
            100.0 * frac
        ));
    }
    if cfg.n_chains > 1 || cfg.n_draws >= 4 {
        for b in &out.diagnostics.blocks {
            let r = b.max_rhat();
            if !(r < RHAT_THRESHOLD) && b.rhat.iter().all(|x| !x.is_nan()) {
                out.diagnostics.warnings.push(format!("{stage}: block `{}` has split R-hat {r:.3}", b.name));
            }
        }
    }
    out.diagnostics.chains.extend(outputs.into_iter().map(|o| o.stats));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{BlockLayout, Transform};
    use alloc::vec;

    struct StdNormal {
        layout: BlockLayout,
    }

    impl StdNormal {
        fn new(dim: usize) -> Self {
            let mut layout = BlockLayout::new();
            layout.push("x", dim, Transform::Identity);
            Self { layout }
        }
    }

    impl LogDensity for StdNormal {
        fn layout(&self) -> &BlockLayout {
            &self.layout
        }
        fn log_density_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for (gi, qi) in g.iter_mut().zip(q) {
                *gi = -qi;
                lp -= 0.5 * qi * qi;
            }
            lp
        }
    }

    #[test]
    fn initialize_is_deterministic_per_chain() {
        let m = StdNormal::new(3);
        assert_eq!(initialize(&m, 5, 0), initialize(&m, 5, 0));
        assert_ne!(initialize(&m, 5, 0), initialize(&m, 5, 1));
        assert!(initialize(&m, 5, 0).iter().all(|x| (-2.0..=2.0).contains(x)));
        assert!(initialize(&StdNormal::new(0), 5, 0).is_empty());
    }

    #[test]
    fn standard_normal_moments() {
        let m = StdNormal::new(1);
        let d = sample(&m, &SamplerConfig { seed: 11, ..Default::default() }).unwrap();
        let x = d.block("x").unwrap().coordinate(0);
        assert_eq!(x.len(), 4000);
        let mean = crate::stats::mean(&x);
        let var = crate::stats::variance(&x);
        assert!(mean.abs() < 0.047, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
        assert!(d.diagnostics.converged());
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let m = StdNormal::new(2);
        let cfg = SamplerConfig { seed: 3, n_warmup: 100, n_draws: 50, ..Default::default() };
        assert_eq!(sample(&m, &cfg).unwrap(), sample(&m, &cfg).unwrap());
        let serial = SamplerConfig { parallel_chains: false, ..cfg.clone() };
        assert_eq!(sample(&m, &cfg).unwrap().blocks(), sample(&m, &serial).unwrap().blocks());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let m = StdNormal::new(1);
        let bad = SamplerConfig { target_accept: 1.0, ..Default::default() };
        assert!(matches!(sample(&m, &bad), Err(Error::InvalidConfig(_))));
        let bad = SamplerConfig { n_chains: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    struct Nowhere {
        layout: BlockLayout,
    }

    impl LogDensity for Nowhere {
        fn layout(&self) -> &BlockLayout {
            &self.layout
        }
        fn log_density_grad(&self, _: &[f64], _: &mut [f64]) -> f64 {
            f64::NAN
        }
    }

    #[test]
    fn non_finite_density_fails_initialization() {
        let mut layout = BlockLayout::new();
        layout.push("x", 1, Transform::Identity);
        let err = sample(&Nowhere { layout }, &SamplerConfig::default()).unwrap_err();
        assert_eq!(err, Error::Initialization { chain: 0, attempts: MAX_INIT_ATTEMPTS });
    }

    #[test]
    fn keep_filters_blocks() {
        let mut layout = BlockLayout::new();
        layout.push("a", 1, Transform::Identity);
        layout.push("b", 2, Transform::Identity);
        let m = StdNormal { layout };
        let cfg = SamplerConfig { seed: 1, n_warmup: 50, n_draws: 20, ..Default::default() };
        let d = sample_blocks(&m, &cfg, "t", Keep::Only(&["b"])).unwrap();
        assert!(d.block("a").is_none());
        assert_eq!(d.block("b").unwrap().values.len(), 2 * 40);
        let _ = vec![0];
    }
}
