use rand::Rng;

use crate::error::Result;
use crate::gridhmm::{backward_sample, forward_filter, FilterMessages, LikelihoodTable, ObservationSet, Transitions};
use crate::models::{ModelParams, ModelSpec};
use crate::process::{collapse_grid, Grid, RateMatrix, Trajectory};

/// Forward pass of one parameter setting over a fixed grid.
#[derive(Clone, Debug)]
pub struct GridFilter {
    pub messages: FilterMessages,
    pub transitions: Transitions,
}

impl GridFilter {
    /// Filters `grid` with `B = I + A/Ω`. `table` may be shared between
    /// parameter settings whose observation model does not depend on θ.
    pub fn run(
        a: &RateMatrix,
        omega: f64,
        grid: &Grid,
        table: &LikelihoodTable,
        pi0: &[f64],
    ) -> Result<Self> {
        let transitions = Transitions::uniformized(a, omega, &grid.times)?;
        let messages = forward_filter(table, &transitions, pi0)?;
        Ok(GridFilter { messages, transitions })
    }

    pub fn log_marginal(&self) -> f64 {
        self.messages.log_marginal
    }

    /// Backward pass followed by removal of the self-transitions.
    pub fn sample_path<R: Rng + ?Sized>(&self, grid: &Grid, rng: &mut R) -> Result<Trajectory> {
        let states = backward_sample(&self.messages, &self.transitions, rng)?;
        collapse_grid(&Grid { times: grid.times.clone(), states: Some(states), t_end: grid.t_end })
    }
}

/// Observation table for `θ` on `grid`.
pub(crate) fn table_for(
    spec: &ModelSpec,
    theta: &ModelParams,
    obs: &ObservationSet,
    grid: &Grid,
) -> Result<LikelihoodTable> {
    let rates = spec.emission_rates(theta);
    LikelihoodTable::build(obs, &grid.times, grid.t_end, spec.dim(), rates.as_deref())
}

/// `log P(X | path, θ)`: observation log-likelihood along a known path.
pub fn path_observation_log_likelihood(
    traj: &Trajectory,
    obs: &ObservationSet,
    rates: Option<&[f64]>,
) -> Result<f64> {
    let dim = traj.max_state() + 1;
    let dim = match (obs, rates) {
        (_, Some(r)) => r.len().max(dim),
        (ObservationSet::PoissonEvents { rates, .. }, None) => rates.len().max(dim),
        _ => dim,
    };
    let table = LikelihoodTable::build(obs, traj.jump_times(), traj.t_end(), dim, rates)?;
    Ok(traj.segments().enumerate().map(|(i, (_, _, s))| table.row(i)[s]).sum())
}
