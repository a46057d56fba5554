use rand::Rng;

use super::grid::{table_for, GridFilter};
use super::{mh_accept, path_observation_log_likelihood, ChainState, StepInfo};
use crate::error::{MjpError, Result};
use crate::gridhmm::ObservationSet;
use crate::models::{
    build_rate_matrix, conjugate_update_immigration, conjugate_update_jc69, conjugate_update_mmpp,
    log_prior, omega_single, Family, ModelParams, ModelSpec,
};
use crate::process::{path_statistics, thin_and_merge, trajectory_log_likelihood, Trajectory};

/// How the Gibbs sampler updates θ given the path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GibbsParamStep {
    /// Conjugate draw when the family has one, MH otherwise.
    #[default]
    Auto,
    Conjugate,
    /// One MH step with the spec's proposal against `p(θ) P(path, X | θ)`.
    Metropolis,
}

/// Rao-Teh update of the path for fixed θ: thin at rate `Ω(θ) - A_{S(t)}`,
/// forward-filter on the grid, backward-sample, drop self-transitions.
/// Returns the new path and `log P(X | W, θ)`.
pub fn rao_teh_path_step<R: Rng + ?Sized>(
    traj: &Trajectory,
    theta: &ModelParams,
    spec: &ModelSpec,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<(Trajectory, f64)> {
    let a = build_rate_matrix(spec, theta)?;
    let omega = omega_single(spec, theta)?;
    let grid = thin_and_merge(traj, &a, omega, rng)?;
    let table = table_for(spec, theta, obs, &grid)?;
    let filter = GridFilter::run(&a, omega, &grid, &table, &spec.initial_distribution())?;
    let path = filter.sample_path(&grid, rng)?;
    Ok((path, filter.log_marginal()))
}

/// Path step followed by a parameter step given the new path.
pub fn gibbs_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    param_step: GibbsParamStep,
    rng: &mut R,
) -> Result<StepInfo> {
    let (traj, log_marginal) = rao_teh_path_step(&state.traj, &state.theta, spec, obs, rng)?;
    state.traj = traj;
    state.log_lik_estimate = None;
    let conjugate = match param_step {
        GibbsParamStep::Auto => spec.has_conjugate_update(),
        GibbsParamStep::Conjugate => {
            if !spec.has_conjugate_update() {
                return Err(MjpError::Unsupported(format!(
                    "{} has no conjugate parameter update",
                    spec.family.name()
                )));
            }
            true
        }
        GibbsParamStep::Metropolis => false,
    };
    let accepted = if conjugate {
        state.theta = sample_conditional(spec, &state.traj, obs, rng)?;
        true
    } else {
        metropolis_param_step(state, spec, obs, rng)?
    };
    Ok(StepInfo { accepted, log_marginal })
}

/// Exact draw from `p(θ | path, X)` for the conjugate families.
pub(crate) fn sample_conditional<R: Rng + ?Sized>(
    spec: &ModelSpec,
    traj: &Trajectory,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<ModelParams> {
    let stats = path_statistics(traj, spec.dim())?;
    let t_end = traj.t_end();
    let posts = match spec.family {
        Family::ImmigrationCapacity { .. } => {
            let (a, b) = conjugate_update_immigration(spec.prior[0], spec.prior[1], &stats, t_end);
            vec![a, b]
        }
        Family::Jc69 => vec![conjugate_update_jc69(spec.prior[0], &stats, t_end)],
        Family::Mmpp => {
            let k = obs.events_per_state(traj, 2);
            conjugate_update_mmpp(&spec.prior, &stats, [k[0], k[1]])?.to_vec()
        }
        _ => {
            return Err(MjpError::Unsupported(format!(
                "{} has no conjugate parameter update",
                spec.family.name()
            )))
        }
    };
    Ok(ModelParams::new(posts.iter().map(|g| g.sample(rng)).collect()))
}

/// `log p(θ) + log P(path | θ) + log P(X | path, θ)`, up to θ-free terms.
fn path_conditional_log_density(
    spec: &ModelSpec,
    theta: &ModelParams,
    traj: &Trajectory,
    obs: &ObservationSet,
) -> Result<f64> {
    let a = build_rate_matrix(spec, theta)?;
    let mut lp = log_prior(spec, theta) + trajectory_log_likelihood(traj, &a);
    if let Some(rates) = spec.emission_rates(theta) {
        lp += path_observation_log_likelihood(traj, obs, Some(&rates))?;
    }
    Ok(lp)
}

fn metropolis_param_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<bool> {
    let proposed = spec.proposal.propose(&state.theta, rng);
    if !proposed.is_valid() {
        mh_accept(f64::NEG_INFINITY, rng);
        return Ok(false);
    }
    let current = path_conditional_log_density(spec, &state.theta, &state.traj, obs)?;
    let candidate = path_conditional_log_density(spec, &proposed, &state.traj, obs)?;
    let log_ratio = candidate - current + spec.proposal.log_proposal_ratio(&state.theta, &proposed);
    let accepted = mh_accept(log_ratio, rng);
    if accepted {
        state.theta = proposed;
    }
    Ok(accepted)
}
