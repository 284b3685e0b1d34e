//! Rank-sum based robust model selection.
//!
//! Candidate models are compared through generalized rank-sum statistics of
//! their per-observation prediction losses; a Gaussian multiplier bootstrap of
//! the minimum statistic yields a p-value per model and a confidence set of
//! models that cannot be shown to be beaten.

pub mod bootstrap;
pub mod error;
pub mod models;
pub mod ranksum;
pub mod rng;
pub mod select;
pub mod simlab;

pub use error::{Error, Result};
