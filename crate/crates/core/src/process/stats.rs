use super::{RateMatrix, Trajectory};
use crate::error::{MjpError, Result};

/// Sufficient statistics of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PathStatistics {
    /// Time spent in each state.
    pub dwell_times: Vec<f64>,
    /// `transition_counts[i * n + j]` counts jumps `i -> j`.
    pub transition_counts: Vec<u64>,
    /// Jumps that increase the state by exactly one.
    pub up_count: u64,
    /// Jumps that decrease the state by exactly one.
    pub down_count: u64,
    /// `Σ_i τ_i · i`.
    pub weighted_dwell: f64,
}

impl PathStatistics {
    pub fn dim(&self) -> usize {
        self.dwell_times.len()
    }

    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.transition_counts[from * self.dim() + to]
    }

    pub fn total_transitions(&self) -> u64 {
        self.transition_counts.iter().sum()
    }
}

pub fn path_statistics(traj: &Trajectory, n_states: usize) -> Result<PathStatistics> {
    if traj.max_state() >= n_states {
        return Err(MjpError::InvalidTrajectory(format!(
            "state {} outside a {n_states}-state space",
            traj.max_state()
        )));
    }
    let mut dwell = vec![0.0; n_states];
    for (start, end, s) in traj.segments() {
        dwell[s] += end - start;
    }
    let mut counts = vec![0u64; n_states * n_states];
    let (mut up, mut down) = (0, 0);
    let mut prev = traj.initial_state();
    for &s in traj.jump_states() {
        counts[prev * n_states + s] += 1;
        if s == prev + 1 {
            up += 1;
        } else if s + 1 == prev {
            down += 1;
        }
        prev = s;
    }
    let weighted = dwell.iter().enumerate().map(|(i, t)| t * i as f64).sum();
    Ok(PathStatistics {
        dwell_times: dwell,
        transition_counts: counts,
        up_count: up,
        down_count: down,
        weighted_dwell: weighted,
    })
}

/// Log density of a path under `a`:
/// `Σ_k log A_{s_k s_{k+1}}(t_{k+1}) - ∫ A_{S(t)}(t) dt`.
///
/// The initial-state probability is not included.
pub fn trajectory_log_likelihood(traj: &Trajectory, a: &RateMatrix) -> f64 {
    let mut ll = 0.0;
    for (start, end, s) in traj.segments() {
        for (lo, hi, m) in a.pieces(start, end) {
            ll += m.get(s, s) * (hi - lo);
        }
    }
    let mut prev = traj.initial_state();
    for (&t, &s) in traj.jump_times().iter().zip(traj.jump_states()) {
        let r = a.rate(prev, s, t);
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += r.ln();
        prev = s;
    }
    ll
}

/// Ordered-point log density of `n_points` events of a homogeneous rate-`rate`
/// Poisson process on `[0, t_end]`: `n log(rate) - rate t_end`.
pub fn poisson_process_log_density(n_points: usize, rate: f64, t_end: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(MjpError::Precondition(format!("Poisson rate {rate} must be positive")));
    }
    Ok(n_points as f64 * rate.ln() - rate * t_end)
}
