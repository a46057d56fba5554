mod common;

use common::mean_se;
use mjp_core::diagnostics::effective_sample_size;
use mjp_core::geweke::{geweke_test, GewekeSetup};
use mjp_core::gridhmm::{GaussianObservation, ObservationSet};
use mjp_core::models::{Family, GammaPrior, ModelParams, ModelSpec, OmegaPolicy, ProposalKernel};
use mjp_core::process::Trajectory;
use mjp_core::rng::chain_rng;
use mjp_core::samplers::{
    bootstrap_particle_filter, gibbs_step, pmmh_step, rao_teh_path_step, run_chain, ChainInit, ChainState,
    GibbsParamStep, Kernel, Resampling,
};
use mjp_core::MjpError;

fn immigration(kappa_policy: OmegaPolicy, sigma2: f64) -> ModelSpec {
    ModelSpec::new(
        Family::ImmigrationCapacity { dim: 3 },
        vec![GammaPrior::new(3.0, 2.0).unwrap(), GammaPrior::new(5.0, 2.0).unwrap()],
        ProposalKernel::lognormal(vec![sigma2; 2]).unwrap(),
        kappa_policy,
    )
    .unwrap()
}

fn gaussian_obs(times: &[f64], values: &[f64], sigma2: f64) -> ObservationSet {
    ObservationSet::gaussian(
        times.iter().zip(values).map(|(&time, &value)| GaussianObservation { time, value, sigma2 }).collect(),
    )
    .unwrap()
}

fn geweke(kernel: Kernel, policy: OmegaPolicy, seed: u64) {
    let spec = immigration(policy, 0.5);
    let setup = GewekeSetup { t_end: 4.0, obs_times: vec![1.0, 2.0, 3.0], sigma2: 1.0, n_samples: 30_000 };
    let report = geweke_test(&kernel, &spec, &setup, seed).unwrap();
    for m in &report.moments {
        assert!(m.z.abs() < 4.0, "{kernel}: {m:?}");
    }
}

#[test]
fn geweke_gibbs() {
    geweke(Kernel::Gibbs { param_step: GibbsParamStep::Auto }, OmegaPolicy::Single { kappa: 2.0 }, 301);
}

#[test]
fn geweke_gibbs_metropolis() {
    geweke(Kernel::Gibbs { param_step: GibbsParamStep::Metropolis }, OmegaPolicy::Single { kappa: 1.5 }, 302);
}

#[test]
fn geweke_naive_mh() {
    geweke(Kernel::NaiveMh, OmegaPolicy::Single { kappa: 2.0 }, 303);
}

#[test]
fn geweke_symmetrized_mh() {
    geweke(Kernel::SymmetrizedMh, OmegaPolicy::Additive { kappa: 1.0 }, 304);
}

#[test]
fn geweke_symmetrized_mh_max_of_max() {
    geweke(Kernel::SymmetrizedMh, OmegaPolicy::MaxOfMax { kappa: 1.5 }, 305);
}

#[test]
fn geweke_pmmh() {
    geweke(Kernel::Pmmh { particles: 5, resampling: Resampling::Multinomial }, OmegaPolicy::Single { kappa: 2.0 }, 306);
}

#[test]
fn rao_teh_without_data_visits_both_states_equally() {
    let spec = ModelSpec::new(
        Family::Mmpp,
        vec![GammaPrior::new(2.0, 2.0).unwrap(); 4],
        ProposalKernel::lognormal(vec![1.0; 4]).unwrap(),
        OmegaPolicy::Single { kappa: 2.0 },
    )
    .unwrap();
    // α = β makes the chain symmetric; no events at all are observed
    let theta = ModelParams::new(vec![1.0, 1.0, 1e-9, 1e-9]);
    let obs = ObservationSet::poisson_events(vec![], vec![1e-9, 1e-9]).unwrap();
    let mut rng = chain_rng(310, 0);
    let mut traj = Trajectory::constant(0, 5.0).unwrap();
    let occupancy: Vec<f64> = (0..20_000)
        .map(|_| {
            traj = rao_teh_path_step(&traj, &theta, &spec, &obs, &mut rng).unwrap().0;
            traj.segments().filter(|s| s.2 == 0).map(|(a, b, _)| b - a).sum::<f64>() / 5.0
        })
        .collect();
    let (m, _) = mean_se(&occupancy);
    let sd = mjp_core::diagnostics::mean_sd(&occupancy).1;
    let se = sd / effective_sample_size(&occupancy).unwrap().sqrt();
    assert!((m - 0.5).abs() < 3.0 * se, "{m} (se {se})");
}

#[test]
fn precise_observation_pins_the_path() {
    let spec = immigration(OmegaPolicy::Single { kappa: 2.0 }, 1.0);
    let obs = gaussian_obs(&[2.5], &[2.0], 1e-8);
    let theta = ModelParams::new(vec![1.5, 1.0]);
    let mut rng = chain_rng(311, 0);
    let mut traj = Trajectory::constant(2, 5.0).unwrap();
    for _ in 0..500 {
        traj = rao_teh_path_step(&traj, &theta, &spec, &obs, &mut rng).unwrap().0;
        assert_eq!(traj.state_at(2.5), 2);
    }
}

#[test]
fn pmmh_with_identical_proposal_still_rejects_sometimes() {
    let spec = immigration(OmegaPolicy::Single { kappa: 2.0 }, 1e-300);
    let obs = gaussian_obs(&[1.0, 2.0, 3.0], &[0.3, 1.4, 0.9], 1.0);
    let theta = ModelParams::new(vec![1.5, 1.0]);
    let mut rng = chain_rng(312, 0);
    let trials = 1000;
    let mut accepted = 0;
    let mut mean_prob = 0.0;
    for _ in 0..trials {
        let current = bootstrap_particle_filter(&spec, &theta, &obs, 4.0, 10, Resampling::Multinomial, &mut rng).unwrap();
        let mut state = ChainState::new(theta.clone(), current.path.clone().unwrap());
        state.log_lik_estimate = Some(current.log_likelihood);
        let fresh = bootstrap_particle_filter(&spec, &theta, &obs, 4.0, 10, Resampling::Multinomial, &mut rng).unwrap();
        mean_prob += (fresh.log_likelihood - current.log_likelihood).exp().min(1.0) / trials as f64;
        let info = pmmh_step(&mut state, &spec, &obs, 10, Resampling::Multinomial, &mut rng).unwrap();
        assert_eq!(state.theta, theta);
        accepted += info.accepted as usize;
    }
    assert!(mean_prob < 1.0);
    assert!(accepted < trials, "{accepted}");
}

#[test]
fn metropolis_gibbs_with_frozen_proposal_always_accepts() {
    let spec = immigration(OmegaPolicy::Single { kappa: 2.0 }, 1e-300);
    let obs = gaussian_obs(&[1.0, 2.0], &[0.0, 1.0], 1.0);
    let mut rng = chain_rng(313, 0);
    let mut state = ChainState::new(ModelParams::new(vec![1.0, 2.0]), Trajectory::constant(0, 3.0).unwrap());
    for _ in 0..100 {
        let info = gibbs_step(&mut state, &spec, &obs, GibbsParamStep::Metropolis, &mut rng).unwrap();
        assert!(info.accepted);
        assert_eq!(state.theta.values(), &[1.0, 2.0]);
    }
}

#[test]
fn unsupported_combinations_error() {
    let spec = ModelSpec::new(
        Family::ExpDecay { dim: 3 },
        vec![GammaPrior::new(3.0, 2.0).unwrap(), GammaPrior::new(5.0, 2.0).unwrap()],
        ProposalKernel::lognormal(vec![1.0; 2]).unwrap(),
        OmegaPolicy::Single { kappa: 2.0 },
    )
    .unwrap();
    let obs = gaussian_obs(&[1.0], &[0.0], 1.0);
    let mut rng = chain_rng(314, 0);
    let mut state = ChainState::new(ModelParams::new(vec![1.0, 1.0]), Trajectory::constant(0, 2.0).unwrap());
    assert!(matches!(
        gibbs_step(&mut state, &spec, &obs, GibbsParamStep::Conjugate, &mut rng),
        Err(MjpError::Unsupported(_))
    ));
}

#[test]
fn run_chain_is_deterministic() {
    let spec = immigration(OmegaPolicy::Additive { kappa: 1.0 }, 0.5);
    let obs = gaussian_obs(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0], 1.0);
    assert!(run_chain(&Kernel::SymmetrizedMh, &spec, &obs, 4.0, 0, 1, &ChainInit::Prior).unwrap().is_empty());
    for kernel in [
        Kernel::Gibbs { param_step: GibbsParamStep::Auto },
        Kernel::NaiveMh,
        Kernel::SymmetrizedMh,
        Kernel::Pmmh { particles: 5, resampling: Resampling::Systematic },
    ] {
        let strip = |seed| {
            run_chain(&kernel, &spec, &obs, 4.0, 50, seed, &ChainInit::Prior)
                .unwrap()
                .into_iter()
                .map(|mut r| {
                    r.step_seconds = 0.0;
                    r
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(7), strip(7), "{kernel}");
        assert_ne!(strip(7), strip(8), "{kernel}");
    }
}
