//! Closed-form Gamma full conditionals of parameters given a path.

use super::GammaPrior;
use crate::error::{MjpError, Result};
use crate::process::PathStatistics;

/// Capacity-`N` immigration model with death rate `i β`:
/// `α | path ~ Gamma(μ + U, λ + t_end - τ_{N-1})` and
/// `β | path ~ Gamma(ω + D, θ̂ + Σ_i τ_i i)`.
pub fn conjugate_update_immigration(
    alpha_prior: GammaPrior,
    beta_prior: GammaPrior,
    stats: &PathStatistics,
    t_end: f64,
) -> (GammaPrior, GammaPrior) {
    let top_dwell = *stats.dwell_times.last().expect("non-empty state space");
    (
        GammaPrior {
            shape: alpha_prior.shape + stats.up_count as f64,
            rate: alpha_prior.rate + t_end - top_dwell,
        },
        GammaPrior {
            shape: beta_prior.shape + stats.down_count as f64,
            rate: beta_prior.rate + stats.weighted_dwell,
        },
    )
}

/// JC69: every state leaves at rate `3α`, so
/// `α | path ~ Gamma(shape + |T|, rate + 3 t_end)`.
pub fn conjugate_update_jc69(prior: GammaPrior, stats: &PathStatistics, t_end: f64) -> GammaPrior {
    GammaPrior {
        shape: prior.shape + stats.total_transitions() as f64,
        rate: prior.rate + 3.0 * t_end,
    }
}

/// Two-state MMPP with parameters `(α, β, λ₁, λ₂)`; `events_per_state[s]`
/// counts the observed events that fall while the path is in state `s`.
pub fn conjugate_update_mmpp(
    priors: &[GammaPrior],
    stats: &PathStatistics,
    events_per_state: [u64; 2],
) -> Result<[GammaPrior; 4]> {
    if priors.len() != 4 || stats.dim() != 2 {
        return Err(MjpError::Config("MMPP update needs 4 priors and a 2-state path".into()));
    }
    let tau = &stats.dwell_times;
    let post = |p: GammaPrior, k: u64, t: f64| GammaPrior { shape: p.shape + k as f64, rate: p.rate + t };
    Ok([
        post(priors[0], stats.count(0, 1), tau[0]),
        post(priors[1], stats.count(1, 0), tau[1]),
        post(priors[2], events_per_state[0], tau[0]),
        post(priors[3], events_per_state[1], tau[1]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{path_statistics, PathStatistics, Trajectory};

    fn priors() -> (GammaPrior, GammaPrior) {
        (GammaPrior::new(3.0, 2.0).unwrap(), GammaPrior::new(5.0, 2.0).unwrap())
    }

    #[test]
    fn empty_path_leaves_shapes_alone() {
        let traj = Trajectory::constant(0, 10.0).unwrap();
        let stats = path_statistics(&traj, 3).unwrap();
        let (a, b) = priors();
        let (pa, pb) = conjugate_update_immigration(a, b, &stats, 10.0);
        assert_eq!((pa.shape, pa.rate), (3.0, 12.0));
        assert_eq!((pb.shape, pb.rate), (5.0, 2.0));
    }

    #[test]
    fn direct_substitution() {
        // 0 -> 1 at 2, 1 -> 2 at 4, 2 -> 1 at 5, t_end 10 (N = 3):
        // U = 2, D = 1, τ = (2, 2 + 5, 1), Σ τ_i i = 7 + 2 = 9.
        let traj = Trajectory::new(0, vec![2.0, 4.0, 5.0], vec![1, 2, 1], 10.0).unwrap();
        let stats = path_statistics(&traj, 3).unwrap();
        assert_eq!((stats.up_count, stats.down_count), (2, 1));
        let (a, b) = priors();
        let (pa, pb) = conjugate_update_immigration(a, b, &stats, 10.0);
        assert_eq!((pa.shape, pa.rate), (5.0, 11.0));
        assert_eq!((pb.shape, pb.rate), (6.0, 2.0 + 9.0));
    }

    #[test]
    fn literal_statistics() {
        let stats = PathStatistics {
            dwell_times: vec![6.0, 3.0, 1.0],
            transition_counts: vec![0; 9],
            up_count: 2,
            down_count: 1,
            weighted_dwell: 4.0,
        };
        let (a, b) = priors();
        let (pa, pb) = conjugate_update_immigration(a, b, &stats, 10.0);
        assert_eq!((pa.shape, pa.rate), (5.0, 11.0));
        assert_eq!((pb.shape, pb.rate), (6.0, 6.0));
    }

    #[test]
    fn jc69_update() {
        let traj = Trajectory::new(0, vec![1.0, 2.0], vec![3, 1], 4.0).unwrap();
        let stats = path_statistics(&traj, 4).unwrap();
        let p = conjugate_update_jc69(GammaPrior::new(3.0, 2.0).unwrap(), &stats, 4.0);
        assert_eq!((p.shape, p.rate), (5.0, 14.0));
    }
}
