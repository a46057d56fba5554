use rand::Rng;

use super::gibbs::rao_teh_path_step;
use super::grid::{table_for, GridFilter};
use super::{mh_accept, ChainState, StepInfo};
use crate::error::Result;
use crate::gridhmm::ObservationSet;
use crate::models::{build_rate_matrix, log_prior, ModelParams, ModelSpec};
use crate::process::{poisson_process_log_density, thin_and_merge, Grid};

/// Terms of the naïve MH log acceptance ratio on a fixed grid `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NaiveAcceptance {
    pub omega_current: f64,
    pub omega_proposed: f64,
    /// `log P(X | W, θ)` with `B = I + A(θ)/Ω(θ)`.
    pub log_lik_current: f64,
    pub log_lik_proposed: f64,
    /// `log P(W | θ)`: rate-`Ω(θ)` Poisson process density.
    pub log_grid_current: f64,
    pub log_grid_proposed: f64,
    pub log_prior_current: f64,
    pub log_prior_proposed: f64,
    /// `log q(θ | ϑ) - log q(ϑ | θ)`.
    pub log_proposal_ratio: f64,
}

impl NaiveAcceptance {
    pub fn log_ratio(&self) -> f64 {
        (self.log_lik_proposed - self.log_lik_current)
            + (self.log_grid_proposed - self.log_grid_current)
            + (self.log_prior_proposed - self.log_prior_current)
            + self.log_proposal_ratio
    }
}

/// Terms of the symmetrized MH log acceptance ratio. Both forward passes share
/// one Ω, so the grid density cancels and only four terms remain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymmetrizedAcceptance {
    pub omega: f64,
    /// `log P(X | W, θ, ϑ)` with `B = I + A(θ)/Ω`.
    pub log_lik_current: f64,
    /// `log P(X | W, ϑ, θ)` with `B = I + A(ϑ)/Ω`.
    pub log_lik_proposed: f64,
    pub log_prior_current: f64,
    pub log_prior_proposed: f64,
    pub log_proposal_ratio: f64,
}

impl SymmetrizedAcceptance {
    pub fn log_ratio(&self) -> f64 {
        (self.log_lik_proposed - self.log_lik_current)
            + (self.log_prior_proposed - self.log_prior_current)
            + self.log_proposal_ratio
    }
}

/// Forward passes for `θ` and `ϑ` over `grid` with their own uniformization
/// rates.
fn filter_pair(
    spec: &ModelSpec,
    obs: &ObservationSet,
    grid: &Grid,
    theta: &ModelParams,
    proposed: &ModelParams,
    omegas: (f64, f64),
) -> Result<(GridFilter, GridFilter)> {
    let pi0 = spec.initial_distribution();
    let a_cur = build_rate_matrix(spec, theta)?;
    let a_new = build_rate_matrix(spec, proposed)?;
    let table_cur = table_for(spec, theta, obs, grid)?;
    let cur = GridFilter::run(&a_cur, omegas.0, grid, &table_cur, &pi0)?;
    let new = if spec.emission_rates(theta).is_none() {
        GridFilter::run(&a_new, omegas.1, grid, &table_cur, &pi0)?
    } else {
        let table_new = table_for(spec, proposed, obs, grid)?;
        GridFilter::run(&a_new, omegas.1, grid, &table_new, &pi0)?
    };
    Ok((cur, new))
}

/// Naïve acceptance ratio of `ϑ` against `θ` on `grid`.
pub fn naive_acceptance(
    spec: &ModelSpec,
    obs: &ObservationSet,
    grid: &Grid,
    theta: &ModelParams,
    proposed: &ModelParams,
) -> Result<(NaiveAcceptance, GridFilter, GridFilter)> {
    let policy = spec.omega_policy;
    let omega_current = policy.single_from_max(build_rate_matrix(spec, theta)?.max_exit_rate())?;
    let omega_proposed = policy.single_from_max(build_rate_matrix(spec, proposed)?.max_exit_rate())?;
    let (cur, new) = filter_pair(spec, obs, grid, theta, proposed, (omega_current, omega_proposed))?;
    let n = grid.len();
    let terms = NaiveAcceptance {
        omega_current,
        omega_proposed,
        log_lik_current: cur.log_marginal(),
        log_lik_proposed: new.log_marginal(),
        log_grid_current: poisson_process_log_density(n, omega_current, grid.t_end)?,
        log_grid_proposed: poisson_process_log_density(n, omega_proposed, grid.t_end)?,
        log_prior_current: log_prior(spec, theta),
        log_prior_proposed: log_prior(spec, proposed),
        log_proposal_ratio: spec.proposal.log_proposal_ratio(theta, proposed),
    };
    Ok((terms, cur, new))
}

/// Symmetrized acceptance ratio of swapping `θ` and `ϑ` on `grid` drawn with
/// the shared rate `omega`.
pub fn symmetrized_acceptance(
    spec: &ModelSpec,
    obs: &ObservationSet,
    grid: &Grid,
    theta: &ModelParams,
    proposed: &ModelParams,
    omega: f64,
) -> Result<(SymmetrizedAcceptance, GridFilter, GridFilter)> {
    let (cur, new) = filter_pair(spec, obs, grid, theta, proposed, (omega, omega))?;
    let terms = SymmetrizedAcceptance {
        omega,
        log_lik_current: cur.log_marginal(),
        log_lik_proposed: new.log_marginal(),
        log_prior_current: log_prior(spec, theta),
        log_prior_proposed: log_prior(spec, proposed),
        log_proposal_ratio: spec.proposal.log_proposal_ratio(theta, proposed),
    };
    Ok((terms, cur, new))
}

/// Proposals outside the positive orthant: reject and refresh the path with
/// a Rao-Teh step at the current θ.
fn reject_invalid<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<StepInfo> {
    mh_accept(f64::NEG_INFINITY, rng);
    let (traj, log_marginal) = rao_teh_path_step(&state.traj, &state.theta, spec, obs, rng)?;
    state.traj = traj;
    Ok(StepInfo { accepted: false, log_marginal })
}

/// Naïve MH: thin with `Ω(θ)`, propose `ϑ`, accept against
/// `P(X|W,ϑ) P(W|ϑ) p(ϑ) q(θ|ϑ) / P(X|W,θ) P(W|θ) p(θ) q(ϑ|θ)`, then
/// backward-sample under the winner.
pub fn naive_mh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<StepInfo> {
    state.log_lik_estimate = None;
    let a = build_rate_matrix(spec, &state.theta)?;
    let omega = spec.omega_policy.single_from_max(a.max_exit_rate())?;
    let grid = thin_and_merge(&state.traj, &a, omega, rng)?;
    let proposed = spec.proposal.propose(&state.theta, rng);
    if !proposed.is_valid() {
        mh_accept(f64::NEG_INFINITY, rng);
        let table = table_for(spec, &state.theta, obs, &grid)?;
        let filter = GridFilter::run(&a, omega, &grid, &table, &spec.initial_distribution())?;
        state.traj = filter.sample_path(&grid, rng)?;
        return Ok(StepInfo { accepted: false, log_marginal: filter.log_marginal() });
    }
    let (terms, cur, new) = naive_acceptance(spec, obs, &grid, &state.theta, &proposed)?;
    let accepted = mh_accept(terms.log_ratio(), rng);
    let winner = if accepted {
        state.theta = proposed;
        new
    } else {
        cur
    };
    state.traj = winner.sample_path(&grid, rng)?;
    Ok(StepInfo { accepted, log_marginal: winner.log_marginal() })
}

/// Symmetrized MH: draw `ϑ ~ q(·|θ)`, thin with `Ω(θ, ϑ) - A_{S(t)}(θ)`,
/// propose swapping `θ` and `ϑ`, backward-sample under the post-swap θ.
pub fn symmetrized_mh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    rng: &mut R,
) -> Result<StepInfo> {
    state.log_lik_estimate = None;
    let proposed = spec.proposal.propose(&state.theta, rng);
    if !proposed.is_valid() {
        return reject_invalid(state, spec, obs, rng);
    }
    let a = build_rate_matrix(spec, &state.theta)?;
    let a_new = build_rate_matrix(spec, &proposed)?;
    let omega = spec.omega_policy.pair_from_max(a.max_exit_rate(), a_new.max_exit_rate())?;
    let grid = thin_and_merge(&state.traj, &a, omega, rng)?;
    let (terms, cur, new) = symmetrized_acceptance(spec, obs, &grid, &state.theta, &proposed, omega)?;
    let accepted = mh_accept(terms.log_ratio(), rng);
    let winner = if accepted {
        state.theta = proposed;
        new
    } else {
        cur
    };
    state.traj = winner.sample_path(&grid, rng)?;
    Ok(StepInfo { accepted, log_marginal: winner.log_marginal() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridhmm::GaussianObservation;
    use crate::models::tests::spec_for;
    use crate::models::Family;
    use crate::process::Trajectory;
    use crate::rng::chain_rng;

    fn setup() -> (ModelSpec, ObservationSet, Grid) {
        let spec = spec_for(Family::ImmigrationCapacity { dim: 3 });
        let obs = ObservationSet::gaussian(
            (1..5)
                .map(|t| GaussianObservation { time: t as f64, value: (t % 3) as f64, sigma2: 1.0 })
                .collect(),
        )
        .unwrap();
        let grid = Grid::new(vec![0.4, 1.1, 1.7, 2.5, 3.2, 4.6], None, 5.0).unwrap();
        (spec, obs, grid)
    }

    #[test]
    fn identical_parameters_give_zero_ratio() {
        let (spec, obs, grid) = setup();
        let theta = ModelParams::new(vec![1.3, 0.8]);
        let (s, _, _) = symmetrized_acceptance(&spec, &obs, &grid, &theta, &theta, 4.0).unwrap();
        assert_eq!(s.log_ratio(), 0.0);
        let (n, _, _) = naive_acceptance(&spec, &obs, &grid, &theta, &theta).unwrap();
        assert_eq!(n.log_ratio(), 0.0);
    }

    #[test]
    fn symmetrized_ratio_is_antisymmetric() {
        let (spec, obs, grid) = setup();
        let theta = ModelParams::new(vec![1.3, 0.8]);
        let other = ModelParams::new(vec![0.6, 2.1]);
        let (fwd, _, _) = symmetrized_acceptance(&spec, &obs, &grid, &theta, &other, 7.0).unwrap();
        let (back, _, _) = symmetrized_acceptance(&spec, &obs, &grid, &other, &theta, 7.0).unwrap();
        assert!((fwd.log_ratio() + back.log_ratio()).abs() < 1e-10);
    }

    #[test]
    fn naive_ratio_carries_grid_density() {
        let (spec, obs, grid) = setup();
        let theta = ModelParams::new(vec![1.3, 0.8]);
        let other = ModelParams::new(vec![0.6, 2.1]);
        let (n, _, _) = naive_acceptance(&spec, &obs, &grid, &theta, &other).unwrap();
        // max exit rates: θ at state 1 (1.3 + 0.8), ϑ at state 2 (2 · 2.1)
        let (o1, o2): (f64, f64) = (4.2, 8.4);
        let k = grid.len() as f64;
        let want = (k * o2.ln() - o2 * 5.0) - (k * o1.ln() - o1 * 5.0);
        assert!((n.log_grid_proposed - n.log_grid_current - want).abs() < 1e-10);
        let sum = (n.log_lik_proposed - n.log_lik_current)
            + want
            + (n.log_prior_proposed - n.log_prior_current)
            + n.log_proposal_ratio;
        assert!((n.log_ratio() - sum).abs() < 1e-10);
    }

    #[test]
    fn steps_keep_valid_state() {
        let (spec, obs, _) = setup();
        let mut rng = chain_rng(5, 0);
        let traj = Trajectory::new(0, vec![1.5, 3.0], vec![1, 2], 5.0).unwrap();
        let mut state = ChainState::new(ModelParams::new(vec![1.0, 1.0]), traj);
        let mut accepted = 0;
        for i in 0..200 {
            let info = if i % 2 == 0 {
                naive_mh_step(&mut state, &spec, &obs, &mut rng).unwrap()
            } else {
                symmetrized_mh_step(&mut state, &spec, &obs, &mut rng).unwrap()
            };
            accepted += info.accepted as usize;
            assert!(state.theta.is_valid());
            assert!(state.traj.max_state() < 3);
            assert!(info.log_marginal.is_finite());
        }
        assert!(accepted > 0 && accepted < 200);
    }
}
