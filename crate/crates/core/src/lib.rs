//! Bayesian and variational-Bayesian joint chance-constrained optimization,
//! applied to M/M/c staffing and to a linear Gaussian chance constraint.
//!
//! The staffing pipeline runs
//! [`queue::simulate_dataset`] → [`vb::fit_vb`] (or [`mcmc::run_chain`]) →
//! [`staffing::solve_with_posterior`] (or [`staffing::solve_with_chain`]).
//! [`experiments`] replicates it across sample sizes.

pub mod distributions;
pub mod erlang;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod mcmc;
pub mod queue;
pub mod rng;
pub mod special;
pub mod staffing;
pub mod vb;

pub use error::{Error, Result};
pub use rng::Seed;
