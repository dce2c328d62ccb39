//! Multinomial No-U-Turn transitions with a diagonal metric.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::glm::LogDensity;
use crate::linalg::dot;
use crate::math::{exp, ln, log_sum_exp, sqrt};
use crate::rng::ChaCha20Rng;

/// Energy error beyond which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl Point {
    pub fn new<M: LogDensity + ?Sized>(model: &M, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = model.log_density_grad(&q, &mut grad);
        let p = vec![0.0; q.len()];
        Self { q, p, grad, logp }
    }

    pub fn is_finite(&self) -> bool {
        self.logp.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }
}

/// Outcome of one NUTS transition.
#[derive(Debug, Clone, Copy)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
}

pub struct Nuts<'m, M: LogDensity + ?Sized> {
    model: &'m M,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub max_depth: usize,
}

struct TreeAcc {
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<'m, M: LogDensity + ?Sized> Nuts<'m, M> {
    pub fn new(model: &'m M, max_depth: usize) -> Self {
        Self { model, step_size: 1.0, inv_metric: vec![1.0; model.dim()], max_depth }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(&self.inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, z: &Point) -> f64 {
        -z.logp + self.kinetic(&z.p)
    }

    fn p_sharp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&self, z: &mut Point, rng: &mut ChaCha20Rng) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = StandardNormal.sample(rng);
            *p = n / sqrt(*m);
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        let half = 0.5 * eps;
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.model.log_density_grad(&z.q, &mut z.grad);
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += half * g;
        }
    }

    /// Heuristic initial step size: double or halve until a single leapfrog
    /// step crosses an acceptance probability of 0.8.
    pub fn find_reasonable_step_size(&mut self, z0: &Point, rng: &mut ChaCha20Rng) {
        if z0.q.is_empty() {
            return;
        }
        let mut z = z0.clone();
        self.sample_momentum(&mut z, rng);
        let h0 = self.hamiltonian(&z);
        self.leapfrog(&mut z, self.step_size);
        let delta = h0 - self.hamiltonian(&z);
        let direction = if delta > ln(0.8) { 1 } else { -1 };
        for _ in 0..100 {
            let mut z = z0.clone();
            self.sample_momentum(&mut z, rng);
            let h0 = self.hamiltonian(&z);
            self.leapfrog(&mut z, self.step_size);
            let mut delta = h0 - self.hamiltonian(&z);
            if delta.is_nan() {
                delta = f64::NEG_INFINITY;
            }
            if (direction == 1 && !(delta > ln(0.8))) || (direction == -1 && !(delta < ln(0.8))) {
                break;
            }
            self.step_size = if direction == 1 { 2.0 * self.step_size } else { 0.5 * self.step_size };
            if self.step_size > 1e7 || self.step_size < 1e-12 {
                self.step_size = self.step_size.clamp(1e-12, 1e7);
                break;
            }
        }
    }

    fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
        dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
    }

    /// One transition from `z` (momentum is resampled). `z` is replaced by
    /// the selected point.
    pub fn transition(&self, z: &mut Point, rng: &mut ChaCha20Rng) -> TransitionStats {
        let dim = z.q.len();
        if dim == 0 {
            return TransitionStats { accept_stat: 1.0, depth: 0, n_leapfrog: 0, divergent: false };
        }
        self.sample_momentum(z, rng);
        let h0 = self.hamiltonian(z);

        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let mut p_fwd_fwd = z.p.clone();
        let mut p_sharp_fwd_fwd = self.p_sharp(&z.p);
        let mut p_fwd_bck = z.p.clone();
        let mut p_sharp_fwd_bck = p_sharp_fwd_fwd.clone();
        let mut p_bck_fwd = z.p.clone();
        let mut p_sharp_bck_fwd = p_sharp_fwd_fwd.clone();
        let mut p_bck_bck = z.p.clone();
        let mut p_sharp_bck_bck = p_sharp_fwd_fwd.clone();

        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;
        let mut acc = TreeAcc { n_leapfrog: 0, sum_metro_prob: 0.0, divergent: false };
        let mut depth = 0;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut log_sum_weight_subtree = f64::NEG_INFINITY;
            let valid = if rng.random::<f64>() > 0.5 {
                // extend forward: the existing trajectory becomes the backward part
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.copy_from_slice(&p_fwd_fwd);
                p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_fwd);
                self.build_tree(
                    depth,
                    &mut z_fwd,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    h0,
                    self.step_size,
                    &mut log_sum_weight_subtree,
                    &mut acc,
                    rng,
                )
            } else {
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.copy_from_slice(&p_bck_bck);
                p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_bck);
                self.build_tree(
                    depth,
                    &mut z_bck,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    h0,
                    -self.step_size,
                    &mut log_sum_weight_subtree,
                    &mut acc,
                    rng,
                )
            };
            if !valid {
                break;
            }
            depth += 1;

            if log_sum_weight_subtree > log_sum_weight {
                z_sample.clone_from(&z_propose);
            } else {
                let accept = exp(log_sum_weight_subtree - log_sum_weight);
                if rng.random::<f64>() < accept {
                    z_sample.clone_from(&z_propose);
                }
            }
            log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

            for k in 0..dim {
                rho[k] = rho_bck[k] + rho_fwd[k];
            }
            let mut persist = Self::criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let rho_ext: Vec<f64> = rho_bck.iter().zip(&p_fwd_bck).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
            let rho_ext: Vec<f64> = rho_fwd.iter().zip(&p_bck_fwd).map(|(a, b)| a + b).collect();
            persist &= Self::criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
            if !persist {
                break;
            }
        }

        *z = z_sample;
        let accept_stat = if acc.n_leapfrog > 0 { acc.sum_metro_prob / acc.n_leapfrog as f64 } else { 0.0 };
        TransitionStats { accept_stat, depth, n_leapfrog: acc.n_leapfrog, divergent: acc.divergent }
    }

    #[allow(clippy::too_many_arguments, clippy::ptr_arg)]
    fn build_tree(
        &self,
        depth: usize,
        z: &mut Point,
        z_propose: &mut Point,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut Vec<f64>,
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        h0: f64,
        eps: f64,
        log_sum_weight: &mut f64,
        acc: &mut TreeAcc,
        rng: &mut ChaCha20Rng,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, eps);
            acc.n_leapfrog += 1;
            let mut h = self.hamiltonian(z);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            if h - h0 > MAX_DELTA_H {
                acc.divergent = true;
            }
            *log_sum_weight = log_sum_exp(*log_sum_weight, h0 - h);
            acc.sum_metro_prob += if h0 - h > 0.0 { 1.0 } else { exp(h0 - h) };
            z_propose.clone_from(z);
            *p_sharp_beg = self.p_sharp(&z.p);
            p_sharp_end.clone_from(p_sharp_beg);
            for (r, p) in rho.iter_mut().zip(&z.p) {
                *r += p;
            }
            p_beg.clone_from(&z.p);
            p_end.clone_from(p_beg);
            return !acc.divergent;
        }

        let dim = z.q.len();
        let mut log_sum_weight_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let valid_init = self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            h0,
            eps,
            &mut log_sum_weight_init,
            acc,
            rng,
        );
        if !valid_init {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut log_sum_weight_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let valid_final = self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            h0,
            eps,
            &mut log_sum_weight_final,
            acc,
            rng,
        );
        if !valid_final {
            return false;
        }

        let log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, log_sum_weight_subtree);
        if log_sum_weight_final > log_sum_weight_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = exp(log_sum_weight_final - log_sum_weight_subtree);
            if rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree: Vec<f64> = rho_init.iter().zip(&rho_final).map(|(a, b)| a + b).collect();
        for (r, s) in rho.iter_mut().zip(&rho_subtree) {
            *r += s;
        }
        let mut persist = Self::criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_ext: Vec<f64> = rho_init.iter().zip(&p_final_beg).map(|(a, b)| a + b).collect();
        persist &= Self::criterion(p_sharp_beg, &p_sharp_final_beg, &rho_ext);
        let rho_ext: Vec<f64> = rho_final.iter().zip(&p_init_end).map(|(a, b)| a + b).collect();
        persist &= Self::criterion(&p_sharp_init_end, p_sharp_end, &rho_ext);
        persist
    }
}
