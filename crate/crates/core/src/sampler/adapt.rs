//! Warmup adaptation: dual averaging of the step size and windowed
//! estimation of a diagonal inverse metric.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{exp, ln, powf, sqrt};

/// Nesterov dual averaging on `log ε` toward a target acceptance statistic.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    target: f64,
    gamma: f64,
    t0: f64,
    kappa: f64,
    mu: f64,
    counter: f64,
    s_bar: f64,
    x_bar: f64,
}

impl DualAveraging {
    pub fn new(target: f64) -> Self {
        Self { target, gamma: 0.05, t0: 10.0, kappa: 0.75, mu: 0.0, counter: 0.0, s_bar: 0.0, x_bar: 0.0 }
    }

    /// Restart around a new initial step size.
    pub fn restart(&mut self, step_size: f64) {
        self.mu = ln(10.0 * step_size);
        self.counter = 0.0;
        self.s_bar = 0.0;
        self.x_bar = 0.0;
    }

    /// Update with the latest acceptance statistic and return the next step size.
    pub fn learn(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let a = if accept_stat.is_nan() { 0.0 } else { accept_stat.min(1.0) };
        let eta = 1.0 / (self.counter + self.t0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - a);
        let x = self.mu - self.s_bar * sqrt(self.counter) / self.gamma;
        let x_eta = powf(self.counter, -self.kappa);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        exp(x)
    }

    /// Step size to use after warmup.
    pub fn final_step_size(&self) -> f64 {
        exp(self.x_bar)
    }
}

/// Schedule of slow metric-adaptation windows over the warmup: an initial
/// fast buffer, doubling windows, and a terminal fast buffer.
#[derive(Debug, Clone)]
pub struct MetricWindows {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    counter: usize,
    window_size: usize,
    next_end: usize,
    enabled: bool,
    // running variance per coordinate
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl MetricWindows {
    pub fn new(n_warmup: usize, dim: usize) -> Self {
        let (mut init, mut term, mut base) = (75usize, 50usize, 25usize);
        let enabled = n_warmup >= 20;
        if enabled && init + term + base > n_warmup {
            init = (0.15 * n_warmup as f64) as usize;
            term = (0.1 * n_warmup as f64) as usize;
            base = n_warmup - (init + term);
        }
        Self {
            n_warmup,
            init_buffer: init,
            term_buffer: term,
            counter: 0,
            window_size: base,
            next_end: init + base - 1,
            enabled,
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.n_warmup - self.term_buffer
            && self.counter != self.n_warmup
    }

    fn at_window_end(&self) -> bool {
        self.counter == self.next_end && self.counter != self.n_warmup
    }

    fn advance_window(&mut self) {
        let last_end = self.n_warmup - self.term_buffer - 1;
        if self.next_end == last_end {
            return;
        }
        self.window_size *= 2;
        self.next_end = self.counter + self.window_size;
        if self.next_end != last_end && self.next_end + 2 * self.window_size >= self.n_warmup - self.term_buffer {
            self.next_end = last_end;
        }
    }

    /// Record a warmup draw. Returns a new inverse metric when a slow window
    /// closes.
    pub fn observe(&mut self, q: &[f64]) -> Option<Vec<f64>> {
        if !self.enabled {
            return None;
        }
        if self.in_window() {
            self.n += 1;
            for (k, &x) in q.iter().enumerate() {
                let d = x - self.mean[k];
                self.mean[k] += d / self.n as f64;
                self.m2[k] += d * (x - self.mean[k]);
            }
        }
        if self.at_window_end() {
            self.advance_window();
            let n = self.n as f64;
            let inv_metric = self
                .m2
                .iter()
                .map(|&m2| {
                    let var = if self.n > 1 { m2 / (n - 1.0) } else { 1.0 };
                    (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                })
                .collect();
            self.n = 0;
            self.mean.iter_mut().for_each(|v| *v = 0.0);
            self.m2.iter_mut().for_each(|v| *v = 0.0);
            self.counter += 1;
            return Some(inv_metric);
        }
        self.counter += 1;
        None
    }
}
