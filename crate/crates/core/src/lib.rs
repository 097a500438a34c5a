//! Positive-unlabeled learning from scratch: a small MLP, unbiased and
//! non-negative PU risk estimators, confident-sample selection with mixup
//! pseudo supervision, a consistency-regularized pseudo-supervised objective,
//! and the two-network training loop that ties them together with progressive
//! knowledge transfer.
//!
//! Everything is seeded and deterministic: named RNG streams isolate the
//! stochastic stages from each other, every objective materializes its random
//! choices before evaluation (so gradients check against finite differences),
//! and identical configs produce byte-identical artifacts.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod optim;
pub mod plot;
pub mod pseudo;
pub mod pspu;
pub mod risk;
pub mod rng;
pub mod ssl;

pub use error::{Error, Result};
