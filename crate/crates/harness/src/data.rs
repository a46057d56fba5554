//! Synthetic data and event-file ingestion.

use std::path::Path;

use mjp_core::gridhmm::ObservationSet;
use mjp_core::models::{build_rate_matrix, sample_prior, ModelParams, ModelSpec};
use mjp_core::process::Trajectory;
use mjp_core::samplers::simulate_path;
use rand::Rng;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Observations plus, for simulated data, the generating parameters and path.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub t_end: f64,
    pub obs: ObservationSet,
    pub truth: Option<(ModelParams, Trajectory)>,
}

/// `n` evenly spaced times strictly inside `(0, t_end)`; for `t_end = 20`
/// and `n = 19` these are the integers 1..19.
pub fn even_times(t_end: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| t_end * k as f64 / (n + 1) as f64).collect()
}

/// Draws θ from the prior, a path from the MJP prior with a uniform initial
/// state, and observations of that path: Gaussian readings at `times`, or
/// Poisson events for the MMPP family.
pub fn generate_synthetic<R: Rng + ?Sized>(
    spec: &ModelSpec,
    t_end: f64,
    times: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<(ModelParams, Trajectory, ObservationSet)> {
    let theta = sample_prior(spec, rng);
    let a = build_rate_matrix(spec, &theta)?;
    let traj = simulate_path(&a, &spec.initial_distribution(), t_end, rng)?;
    let obs = match spec.emission_rates(&theta) {
        Some(rates) => ObservationSet::simulate_poisson_events(&traj, &rates, rng)?,
        None => ObservationSet::simulate_gaussian(&traj, times, sigma2, rng)?,
    };
    Ok((theta, traj, obs))
}

/// Affine map of `positions` onto `[0, target]`, sorted. A zero-width span
/// maps everything to 0.
pub fn rescale_events(mut positions: Vec<f64>, target: f64) -> Vec<f64> {
    positions.sort_by(f64::total_cmp);
    let (lo, hi) = match (positions.first(), positions.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return positions,
    };
    let span = hi - lo;
    if span <= 0.0 {
        log::warn!("event positions span zero width; all {} events placed at 0", positions.len());
        return vec![0.0; positions.len()];
    }
    positions.iter().map(|p| ((p - lo) / span * target).clamp(0.0, target)).collect()
}

/// Reads newline-delimited non-negative positions and rescales them onto
/// `[0, target]`. The returned emission rates are placeholders; the model
/// supplies them from θ.
pub fn load_event_file(path: &Path, target: f64) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut positions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let ingest = |message: String| HarnessError::Ingest { path: path.to_path_buf(), line: i + 1, message };
        let value: f64 = line.parse().map_err(|_| ingest(format!("not a number: {line:?}")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(ingest(format!("position {value} must be a non-negative number")));
        }
        positions.push(value);
    }
    if positions.is_empty() {
        return Err(HarnessError::Ingest { path: path.to_path_buf(), line: 0, message: "no events".into() });
    }
    if positions.len() == 1 {
        log::warn!("{}: a single event carries no scale information", path.display());
    }
    Ok(ObservationSet::poisson_events(rescale_events(positions, target), vec![1.0, 1.0])?)
}

/// Serializable snapshot of a simulated dataset.
#[derive(Debug, Serialize)]
pub struct SyntheticDump<'a> {
    pub family: String,
    pub param_names: &'a [&'a str],
    pub theta: &'a [f64],
    pub t_end: f64,
    pub initial_state: usize,
    pub jump_times: &'a [f64],
    pub jump_states: &'a [usize],
    pub observations: serde_json::Value,
}

impl<'a> SyntheticDump<'a> {
    pub fn new(spec: &'a ModelSpec, theta: &'a ModelParams, traj: &'a Trajectory, obs: &ObservationSet) -> Self {
        let observations = match obs {
            ObservationSet::GaussianPoints(points) => serde_json::json!({
                "type": "gaussian_points",
                "points": points.iter().map(|p| serde_json::json!({
                    "time": p.time, "value": p.value, "sigma2": p.sigma2
                })).collect::<Vec<_>>(),
            }),
            ObservationSet::PoissonEvents { times, .. } => serde_json::json!({
                "type": "poisson_events",
                "times": times,
            }),
        };
        SyntheticDump {
            family: spec.family.name().to_string(),
            param_names: spec.param_names(),
            theta: theta.values(),
            t_end: traj.t_end(),
            initial_state: traj.initial_state(),
            jump_times: traj.jump_times(),
            jump_states: traj.jump_states(),
            observations,
        }
    }
}
