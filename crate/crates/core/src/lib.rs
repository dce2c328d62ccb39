//! Targeted maximum likelihood estimation of the average treatment effect,
//! in its classical form and as three Bayesian variants that return a full
//! posterior distribution of the effect.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only adds
//! concurrent execution of sampler chains; results are bit-identical with or
//! without it.
//!
//! Layout:
//! - [`data`]: datasets, design matrices and encoding metadata
//! - [`glm`]: log densities, gradients and maximum likelihood fits
//! - [`sampler`]: No-U-Turn Hamiltonian Monte Carlo
//! - [`classical`]: frequentist TMLE with influence-curve intervals
//! - [`bayes`]: B-TMLE-M, B-TMLE-SS and BN-TMLE
//! - [`ate`]: posterior ATE summaries (intervals, kernel density)
//! - [`simgen`]: seeded synthetic data generators

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ate;
pub mod bayes;
pub mod classical;
pub mod data;
pub mod draws;
mod error;
pub mod glm;
pub mod linalg;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
