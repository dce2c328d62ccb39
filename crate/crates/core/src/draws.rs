//! Posterior draws grouped into named parameter blocks.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::stats;
use crate::{Error, Result};

/// Draws of one parameter block, stored draw-major (`draws × dim`).
/// Draw `j` of chain `c` sits at index `c · n_draws_per_chain + j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Block {
    pub name: String,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Block {
    pub fn n_draws(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn draw(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// All draws of coordinate `k`.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.values.iter().skip(k).step_by(self.dim).copied().collect()
    }

    /// Posterior mean of every coordinate.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim).map(|k| stats::mean(&self.coordinate(k))).collect()
    }

    /// Posterior sd of every coordinate.
    pub fn sd(&self) -> Vec<f64> {
        (0..self.dim).map(|k| stats::sd(&self.coordinate(k))).collect()
    }
}

/// Convergence summary of one block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockDiagnostics {
    pub name: String,
    /// Split-R̂ per coordinate.
    pub rhat: Vec<f64>,
    pub min_ess: f64,
}

impl BlockDiagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NAN, f64::max)
    }
}

/// Sampler statistics for one chain of one sampling stage.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainStats {
    pub stage: String,
    pub chain: usize,
    pub step_size: f64,
    pub mean_accept: f64,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub n_draws: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub blocks: Vec<BlockDiagnostics>,
    pub chains: Vec<ChainStats>,
    pub warnings: Vec<String>,
}

/// R̂ at or above this value marks a block as unconverged.
pub const RHAT_THRESHOLD: f64 = 1.05;

impl Diagnostics {
    /// Largest split-R̂ over all blocks (NaN when no block has one).
    pub fn max_rhat(&self) -> f64 {
        self.blocks.iter().map(BlockDiagnostics::max_rhat).fold(f64::NAN, f64::max)
    }

    /// True when every R̂ is finite and below [`RHAT_THRESHOLD`].
    pub fn converged(&self) -> bool {
        self.blocks.iter().flat_map(|b| &b.rhat).all(|r| r.is_finite() && *r < RHAT_THRESHOLD)
    }

    pub fn total_divergences(&self) -> usize {
        self.chains.iter().map(|c| c.divergences).sum()
    }

    pub fn mean_accept(&self) -> f64 {
        let v: Vec<f64> = self.chains.iter().map(|c| c.mean_accept).collect();
        stats::mean(&v)
    }
}

/// Named blocks of posterior draws plus chain provenance and diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PosteriorDraws {
    blocks: Vec<Block>,
    n_chains: usize,
    n_draws_per_chain: usize,
    pub diagnostics: Diagnostics,
}

impl PosteriorDraws {
    pub fn new(n_chains: usize, n_draws_per_chain: usize) -> Self {
        Self { blocks: Vec::new(), n_chains, n_draws_per_chain, diagnostics: Diagnostics::default() }
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn n_draws_per_chain(&self) -> usize {
        self.n_draws_per_chain
    }

    /// Total number of draws `m`.
    pub fn n_draws(&self) -> usize {
        self.n_chains * self.n_draws_per_chain
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Block> {
        self.block(name).ok_or_else(|| Error::MissingBlock(name.into()))
    }

    /// Add a block, replacing any block of the same name. Computes its
    /// split-R̂ and ESS from the chain layout.
    pub fn insert(&mut self, name: &str, dim: usize, values: Vec<f64>) -> Result<()> {
        let m = self.n_draws();
        if values.len() != m * dim {
            return Err(Error::Shape(format!(
                "block `{name}` has {} values, expected {m} draws × {dim}",
                values.len()
            )));
        }
        let block = Block { name: name.into(), dim, values };
        let diag = self.block_diagnostics(&block);
        self.blocks.retain(|b| b.name != name);
        self.diagnostics.blocks.retain(|b| b.name != name);
        self.blocks.push(block);
        self.diagnostics.blocks.push(diag);
        Ok(())
    }

    /// Remove a block and its diagnostics.
    pub fn remove(&mut self, name: &str) -> Option<Block> {
        let pos = self.blocks.iter().position(|b| b.name == name)?;
        self.diagnostics.blocks.retain(|b| b.name != name);
        Some(self.blocks.remove(pos))
    }

    fn block_diagnostics(&self, block: &Block) -> BlockDiagnostics {
        let per = self.n_draws_per_chain;
        let mut rhat = Vec::with_capacity(block.dim);
        let mut min_ess = f64::INFINITY;
        for k in 0..block.dim {
            let coord = block.coordinate(k);
            let chains: Vec<&[f64]> = coord.chunks(per.max(1)).collect();
            rhat.push(stats::split_rhat(&chains));
            min_ess = min_ess.min(stats::effective_sample_size(&chains));
        }
        if block.dim == 0 {
            min_ess = f64::NAN;
        }
        BlockDiagnostics { name: block.name.clone(), rhat, min_ess }
    }

    /// Combine blocks and diagnostics of two posteriors with identical draw
    /// layouts. Blocks of `other` replace same-named blocks of `self`.
    pub fn merge(mut self, other: PosteriorDraws) -> Result<PosteriorDraws> {
        if self.n_chains != other.n_chains || self.n_draws_per_chain != other.n_draws_per_chain {
            return Err(Error::Shape(format!(
                "cannot merge {}×{} draws with {}×{}",
                self.n_chains, self.n_draws_per_chain, other.n_chains, other.n_draws_per_chain
            )));
        }
        for (b, d) in other.blocks.into_iter().zip(other.diagnostics.blocks) {
            self.blocks.retain(|x| x.name != b.name);
            self.diagnostics.blocks.retain(|x| x.name != b.name);
            self.blocks.push(b);
            self.diagnostics.blocks.push(d);
        }
        self.diagnostics.chains.extend(other.diagnostics.chains);
        self.diagnostics.warnings.extend(other.diagnostics.warnings);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn blocks_share_draw_count() {
        let mut d = PosteriorDraws::new(2, 3);
        d.insert("a", 1, vec![0.0; 6]).unwrap();
        assert!(d.insert("b", 2, vec![0.0; 6]).is_err());
        d.insert("b", 2, vec![0.0; 12]).unwrap();
        assert_eq!(d.block("b").unwrap().n_draws(), 6);
        assert!(matches!(d.require("c"), Err(Error::MissingBlock(_))));
    }

    #[test]
    fn coordinates_and_moments() {
        let mut d = PosteriorDraws::new(1, 4);
        d.insert("t", 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]).unwrap();
        let b = d.block("t").unwrap();
        assert_eq!(b.coordinate(1), vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(b.mean(), vec![2.5, 25.0]);
        assert_eq!(b.draw(2), &[3.0, 30.0]);
    }

    #[test]
    fn merge_replaces_and_appends() {
        let mut a = PosteriorDraws::new(1, 2);
        a.insert("x", 1, vec![1.0, 2.0]).unwrap();
        let mut b = PosteriorDraws::new(1, 2);
        b.insert("x", 1, vec![5.0, 6.0]).unwrap();
        b.insert("y", 1, vec![7.0, 8.0]).unwrap();
        let m = a.merge(b).unwrap();
        assert_eq!(m.block("x").unwrap().values, vec![5.0, 6.0]);
        assert_eq!(m.blocks().len(), 2);
        assert_eq!(m.diagnostics.blocks.len(), 2);
        assert!(m.merge(PosteriorDraws::new(2, 2)).is_err());
    }
}
