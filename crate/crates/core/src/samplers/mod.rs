//! MCMC kernels over `(θ, path)` and a chain runner.
//!
//! Every kernel updates a [`ChainState`] in place and returns a [`StepInfo`].
//! Accept/reject decisions always consume exactly one uniform draw, so the
//! random streams of different kernels stay aligned.

mod gibbs;
mod grid;
mod mh;
mod pmmh;

pub use gibbs::{gibbs_step, rao_teh_path_step, GibbsParamStep};
pub use grid::{path_observation_log_likelihood, GridFilter};
pub use mh::{
    naive_acceptance, naive_mh_step, symmetrized_acceptance, symmetrized_mh_step,
    NaiveAcceptance, SymmetrizedAcceptance,
};
pub use pmmh::{
    bootstrap_particle_filter, conditional_particle_filter, particle_filter, pmmh_step,
    ParticleEstimate, Resampling,
};

use std::fmt;
use std::time::Instant;

use rand::Rng;

use crate::error::Result;
use crate::gridhmm::ObservationSet;
use crate::models::{build_rate_matrix, sample_prior, ModelParams, ModelSpec};
use crate::process::{
    collapse_grid, gillespie_simulate, simulate_uniformized, RateMatrix, Trajectory,
};
use crate::rng::chain_rng;

/// Current position of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub theta: ModelParams,
    pub traj: Trajectory,
    /// Particle estimate of `log P(X | θ)` carried by PMMH. `None` forces a
    /// refresh (conditional on the current path) before the next PMMH step.
    pub log_lik_estimate: Option<f64>,
    pub iteration: usize,
}

impl ChainState {
    pub fn new(theta: ModelParams, traj: Trajectory) -> Self {
        ChainState { theta, traj, log_lik_estimate: None, iteration: 0 }
    }
}

/// What a single kernel application did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub accepted: bool,
    /// Log marginal likelihood computed during the step (for the grid-based
    /// kernels, `log P(X | W, θ')`; for PMMH, the carried estimate).
    pub log_marginal: f64,
}

/// One row of chain output.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub n_transitions: usize,
    pub accepted: bool,
    pub log_marginal: f64,
    pub step_seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// Rao-Teh path update followed by a parameter update given the path.
    Gibbs { param_step: GibbsParamStep },
    /// MH on θ given the grid, with `Ω = Ω(θ)`.
    NaiveMh,
    /// MH swap of `(θ, ϑ)` on a grid drawn with `Ω = Ω(θ, ϑ)`.
    SymmetrizedMh,
    /// Particle-marginal MH with a bootstrap filter.
    Pmmh { particles: usize, resampling: Resampling },
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Gibbs { .. } => "gibbs",
            Kernel::NaiveMh => "naive_mh",
            Kernel::SymmetrizedMh => "symmetrized_mh",
            Kernel::Pmmh { .. } => "pmmh",
        }
    }

    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState,
        spec: &ModelSpec,
        obs: &ObservationSet,
        rng: &mut R,
    ) -> Result<StepInfo> {
        let info = match *self {
            Kernel::Gibbs { param_step } => gibbs_step(state, spec, obs, param_step, rng),
            Kernel::NaiveMh => naive_mh_step(state, spec, obs, rng),
            Kernel::SymmetrizedMh => symmetrized_mh_step(state, spec, obs, rng),
            Kernel::Pmmh { particles, resampling } => pmmh_step(state, spec, obs, particles, resampling, rng),
        }?;
        state.iteration += 1;
        Ok(info)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Pmmh { particles, .. } => write!(f, "pmmh_p{particles}"),
            other => f.write_str(other.name()),
        }
    }
}

/// Starting point of a chain.
#[derive(Clone, Debug)]
pub enum ChainInit {
    /// θ from the prior, path simulated under θ ignoring the data.
    Prior,
    /// θ given, path simulated under θ ignoring the data.
    Params(ModelParams),
    State(ChainState),
}

/// Path on `[0, t_end]` simulated from the MJP prior with generator `a`.
pub fn simulate_path<R: Rng + ?Sized>(
    a: &RateMatrix,
    pi0: &[f64],
    t_end: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if a.is_time_dependent() {
        let omega = 2.0 * a.max_exit_rate().max(f64::MIN_POSITIVE);
        collapse_grid(&simulate_uniformized(a, pi0, t_end, omega, rng)?)
    } else {
        gillespie_simulate(a, pi0, t_end, rng)
    }
}

pub fn initial_state<R: Rng + ?Sized>(
    init: &ChainInit,
    spec: &ModelSpec,
    t_end: f64,
    rng: &mut R,
) -> Result<ChainState> {
    let theta = match init {
        ChainInit::State(s) => return Ok(s.clone()),
        ChainInit::Prior => sample_prior(spec, rng),
        ChainInit::Params(theta) => theta.clone(),
    };
    let a = build_rate_matrix(spec, &theta)?;
    let traj = simulate_path(&a, &spec.initial_distribution(), t_end, rng)?;
    Ok(ChainState::new(theta, traj))
}

/// Runs `n_iter` kernel steps from `init` using the random source `rng`.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_with<R: Rng + ?Sized>(
    kernel: &Kernel,
    spec: &ModelSpec,
    obs: &ObservationSet,
    t_end: f64,
    n_iter: usize,
    init: &ChainInit,
    rng: &mut R,
) -> Result<Vec<ChainRecord>> {
    obs.check_horizon(t_end)?;
    let mut state = initial_state(init, spec, t_end, rng)?;
    let mut records = Vec::with_capacity(n_iter);
    for iteration in 0..n_iter {
        let start = Instant::now();
        let info = kernel.step(&mut state, spec, obs, rng)?;
        let step_seconds = start.elapsed().as_secs_f64();
        records.push(ChainRecord {
            iteration,
            theta: state.theta.values().to_vec(),
            n_transitions: state.traj.n_transitions(),
            accepted: info.accepted,
            log_marginal: info.log_marginal,
            step_seconds,
        });
    }
    Ok(records)
}

/// Runs a chain on stream 0 of `seed`; identical seeds give identical records
/// apart from timing.
pub fn run_chain(
    kernel: &Kernel,
    spec: &ModelSpec,
    obs: &ObservationSet,
    t_end: f64,
    n_iter: usize,
    seed: u64,
    init: &ChainInit,
) -> Result<Vec<ChainRecord>> {
    let mut rng = chain_rng(seed, 0);
    run_chain_with(kernel, spec, obs, t_end, n_iter, init, &mut rng)
}

/// MH decision; always consumes one uniform.
pub(crate) fn mh_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.gen();
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || u.ln() < log_ratio
}
