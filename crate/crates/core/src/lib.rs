//! Bayesian inference for Markov jump processes (MJPs) built on uniformization.
//!
//! The crate is organised bottom-up:
//!
//! * [`process`] holds rate matrices, trajectories, Gillespie simulation,
//!   Poisson thinning and path sufficient statistics.
//! * [`models`] maps parameter vectors onto structured rate matrices and
//!   carries priors, proposal kernels and uniformization-rate policies.
//! * [`gridhmm`] is the discrete-time HMM machinery that runs on a
//!   uniformization grid (forward filtering, backward sampling).
//! * [`samplers`] contains the MCMC kernels: Rao-Teh Gibbs, naïve MH,
//!   symmetrized MH and particle-marginal MH, plus a chain runner.
//! * [`diagnostics`] computes effective sample sizes and trace summaries.
//! * [`geweke`] checks that a kernel leaves the joint posterior invariant.

pub mod diagnostics;
pub mod error;
pub mod geweke;
pub mod gridhmm;
pub mod models;
pub mod process;
pub mod rng;
pub mod samplers;

pub use error::{MjpError, Result};
