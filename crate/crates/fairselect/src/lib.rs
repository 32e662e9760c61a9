//! Centralized candidate-to-institution selection under biased utility
//! estimates.
//!
//! Candidates carry a latent utility that institutions observe only through a
//! (possibly biased) estimate, plus a preference list over institutions.
//! Every institution ranks candidates by the same observed utilities, which
//! makes the stable assignment unique and computable by serial dictatorship.
//! This crate implements that baseline together with four constrained
//! variants, the fairness and utility metrics used to compare them,
//! closed-form predictions for the uniform-utility special case, CSV ingest
//! for exam-score data, and a seeded Monte Carlo sweep harness with a CLI.

pub mod bias;
pub mod cli;
mod error;
pub mod harness;
pub mod ingest;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod sampling;
pub mod theory;

pub use error::Error;
pub use model::{Assignment, GroupLabels, Instance, LatentProfile};
