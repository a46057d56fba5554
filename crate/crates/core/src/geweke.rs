//! Joint-distribution ("getting it right") checks for MCMC kernels.
//!
//! Marginal-conditional draws `θ ~ p(θ)`, `path ~ p(path | θ)`,
//! `X ~ p(X | path)` are compared with a successive-conditional chain that
//! alternates `X ~ p(X | path)` with one kernel step. A kernel that leaves
//! the posterior invariant produces the same joint law of `(θ, path)` in both.

use crate::diagnostics::{effective_sample_size, mean_sd};
use crate::error::Result;
use crate::gridhmm::ObservationSet;
use crate::models::{build_rate_matrix, sample_prior, ModelParams, ModelSpec};
use crate::process::Trajectory;
use crate::rng::chain_rng;
use crate::samplers::{simulate_path, ChainState, Kernel};

/// Observation design shared by both simulators.
#[derive(Clone, Debug, PartialEq)]
pub struct GewekeSetup {
    pub t_end: f64,
    pub obs_times: Vec<f64>,
    pub sigma2: f64,
    pub n_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GewekeMoment {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    /// Standard error using the chain's effective sample size.
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GewekeReport {
    pub moments: Vec<GewekeMoment>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.moments.iter().map(|m| m.z.abs()).fold(0.0, f64::max)
    }
}

/// First and second moments of every θ coordinate and of `|T|`.
fn test_functions(theta: &ModelParams, traj: &Trajectory) -> Vec<f64> {
    let mut out: Vec<f64> = theta.values().iter().flat_map(|&v| [v, v * v]).collect();
    let n = traj.n_transitions() as f64;
    out.extend([n, n * n]);
    out
}

fn moment_names(spec: &ModelSpec) -> Vec<String> {
    let mut names: Vec<String> = spec
        .param_names()
        .iter()
        .flat_map(|p| [p.to_string(), format!("{p}^2")])
        .collect();
    names.extend(["n_transitions".to_string(), "n_transitions^2".to_string()]);
    names
}

fn forward_draw<R: rand::Rng + ?Sized>(
    spec: &ModelSpec,
    setup: &GewekeSetup,
    rng: &mut R,
) -> Result<(ModelParams, Trajectory, ObservationSet)> {
    let theta = sample_prior(spec, rng);
    let a = build_rate_matrix(spec, &theta)?;
    let traj = simulate_path(&a, &spec.initial_distribution(), setup.t_end, rng)?;
    let obs = ObservationSet::simulate_gaussian(&traj, &setup.obs_times, setup.sigma2, rng)?;
    Ok((theta, traj, obs))
}

/// Runs both simulators for `kernel` with Gaussian observations.
pub fn geweke_test(kernel: &Kernel, spec: &ModelSpec, setup: &GewekeSetup, seed: u64) -> Result<GewekeReport> {
    let names = moment_names(spec);
    let k = names.len();
    let n = setup.n_samples;

    let mut rng = chain_rng(seed, 0);
    let mut forward = (0..k).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
    for _ in 0..n {
        let (theta, traj, _) = forward_draw(spec, setup, &mut rng)?;
        for (col, v) in forward.iter_mut().zip(test_functions(&theta, &traj)) {
            col.push(v);
        }
    }

    let mut rng = chain_rng(seed, 1);
    let (theta, traj, _) = forward_draw(spec, setup, &mut rng)?;
    let mut state = ChainState::new(theta, traj);
    let mut chain = (0..k).map(|_| Vec::with_capacity(n)).collect::<Vec<_>>();
    for _ in 0..n {
        let obs = ObservationSet::simulate_gaussian(&state.traj, &setup.obs_times, setup.sigma2, &mut rng)?;
        state.log_lik_estimate = None;
        kernel.step(&mut state, spec, &obs, &mut rng)?;
        for (col, v) in chain.iter_mut().zip(test_functions(&state.theta, &state.traj)) {
            col.push(v);
        }
    }

    let moments = names
        .into_iter()
        .zip(forward.iter().zip(&chain))
        .map(|(name, (f, c))| {
            let (fm, fsd) = mean_sd(f);
            let (cm, csd) = mean_sd(c);
            let forward_se = fsd / (n as f64).sqrt();
            let ess = effective_sample_size(c)?;
            let chain_se = if ess > 0.0 { csd / ess.sqrt() } else { 0.0 };
            let se = (forward_se * forward_se + chain_se * chain_se).sqrt();
            let z = if se > 0.0 { (fm - cm) / se } else if fm == cm { 0.0 } else { f64::INFINITY };
            Ok(GewekeMoment { name, forward_mean: fm, forward_se, chain_mean: cm, chain_se, z })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GewekeReport { moments })
}
