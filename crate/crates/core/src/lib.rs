//! Individual treatment-effect estimation when confounders are latent and
//! only noisy proxies are observed: an adversarially trained
//! encoder/decoder model, data generators, baselines and an experiment
//! harness.

pub mod cli;
pub mod config;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
