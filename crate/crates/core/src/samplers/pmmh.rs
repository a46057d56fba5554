use rand::Rng;

use super::{mh_accept, ChainState, StepInfo};
use crate::error::{MjpError, Result};
use crate::gridhmm::{GaussianObservation, ObservationSet};
use crate::models::{build_rate_matrix, log_prior, ModelParams, ModelSpec};
use crate::process::{extend_path, sample_categorical, RateMatrix, Trajectory};

/// Resampling scheme applied after every observation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Resampling {
    #[default]
    Multinomial,
    /// Lower variance, but only used for the unconditional filter.
    Systematic,
}

impl Resampling {
    pub fn name(&self) -> &'static str {
        match self {
            Resampling::Multinomial => "multinomial",
            Resampling::Systematic => "systematic",
        }
    }
}

/// Output of one particle-filter sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEstimate {
    /// Log of the unbiased estimate of `P(X | θ)`; `-inf` when degenerate.
    pub log_likelihood: f64,
    /// A path drawn from the particle approximation of `P(path | X, θ)`.
    /// `None` when every weight vanished.
    pub path: Option<Trajectory>,
    pub degenerate: bool,
}

struct Segment {
    times: Vec<f64>,
    states: Vec<usize>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

/// Ancestor indices for the next stage. With `conditional`, slot 0 keeps the
/// reference lineage and the rest are drawn multinomially.
fn resample<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: Resampling,
    conditional: bool,
    rng: &mut R,
) -> Vec<usize> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w / total;
        cumulative.push(acc);
    }
    if conditional {
        let mut out = Vec::with_capacity(n);
        out.push(0);
        out.extend((1..n).map(|_| pick(&cumulative, rng.gen::<f64>())));
        return out;
    }
    match scheme {
        Resampling::Multinomial => (0..n).map(|_| pick(&cumulative, rng.gen::<f64>())).collect(),
        Resampling::Systematic => {
            let u0 = rng.gen::<f64>() / n as f64;
            (0..n).map(|i| pick(&cumulative, u0 + i as f64 / n as f64)).collect()
        }
    }
}

/// Bootstrap (or, with `reference`, conditional) SMC over Gaussian point
/// observations. Particles move under the prior dynamics between distinct
/// observation times, are weighted by the observation likelihood and
/// resampled; a final unweighted stage runs to `t_end`. The returned path is
/// a uniformly chosen final particle traced back through its ancestry.
#[allow(clippy::too_many_arguments)]
pub fn particle_filter<R: Rng + ?Sized>(
    a: &RateMatrix,
    pi0: &[f64],
    points: &[GaussianObservation],
    t_end: f64,
    particles: usize,
    resampling: Resampling,
    reference: Option<&Trajectory>,
    rng: &mut R,
) -> Result<ParticleEstimate> {
    if particles == 0 {
        return Err(MjpError::Config("particle count must be at least 1".into()));
    }
    if pi0.len() != a.dim() {
        return Err(MjpError::Config(format!(
            "initial distribution has {} entries for a {}-state process",
            pi0.len(),
            a.dim()
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(MjpError::Config(format!("horizon {t_end} must be positive")));
    }
    if points.windows(2).any(|w| w[0].time > w[1].time) {
        return Err(MjpError::Config("observation times must be sorted".into()));
    }
    if let Some(last) = points.last() {
        if last.time > t_end {
            return Err(MjpError::Config(format!(
                "observation at t = {} lies beyond the horizon {t_end}",
                last.time
            )));
        }
    }
    if let Some(r) = reference {
        if r.t_end() != t_end || r.max_state() >= a.dim() {
            return Err(MjpError::InvalidTrajectory(
                "reference path does not match the model or horizon".into(),
            ));
        }
    }

    // Observations sharing a time form one weighting step.
    let mut groups: Vec<&[GaussianObservation]> = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || points[i].time != points[start].time {
            groups.push(&points[start..i]);
            start = i;
        }
    }

    let p = particles;
    let initial: Vec<usize> = (0..p)
        .map(|i| match reference {
            Some(r) if i == 0 => r.initial_state(),
            _ => sample_categorical(pi0, rng),
        })
        .collect();
    let mut current = initial.clone();
    let mut ancestors: Vec<usize> = (0..p).collect();
    let mut history: Vec<(Vec<usize>, Vec<Segment>)> = Vec::with_capacity(groups.len() + 1);
    let mut log_lik = 0.0;
    let mut from = 0.0;
    let mut log_w = vec![0.0; p];

    for stage in 0..=groups.len() {
        let to = groups.get(stage).map_or(t_end, |g| g[0].time);
        let mut next = Vec::with_capacity(p);
        let mut segments = Vec::with_capacity(p);
        for (i, &anc) in ancestors.iter().enumerate() {
            match reference {
                Some(r) if i == 0 => {
                    let lo = r.jump_times().partition_point(|&t| t <= from);
                    let hi = r.jump_times().partition_point(|&t| t <= to);
                    segments.push(Segment {
                        times: r.jump_times()[lo..hi].to_vec(),
                        states: r.jump_states()[lo..hi].to_vec(),
                    });
                    next.push(r.state_at(to));
                }
                _ => {
                    let mut seg = Segment { times: Vec::new(), states: Vec::new() };
                    let end = extend_path(a, current[anc], from, to, &mut seg.times, &mut seg.states, rng);
                    segments.push(seg);
                    next.push(end);
                }
            }
        }
        history.push((ancestors.clone(), segments));
        current = next;
        from = to;

        let Some(group) = groups.get(stage) else { break };
        for (lw, &s) in log_w.iter_mut().zip(&current) {
            *lw = group.iter().map(|o| o.log_likelihood(s)).sum();
        }
        let lse = log_sum_exp(&log_w);
        if lse == f64::NEG_INFINITY || lse.is_nan() {
            log::debug!("particle filter degenerate at t = {to}");
            return Ok(ParticleEstimate { log_likelihood: f64::NEG_INFINITY, path: None, degenerate: true });
        }
        log_lik += lse - (p as f64).ln();
        let weights: Vec<f64> = log_w.iter().map(|lw| (lw - lse).exp()).collect();
        ancestors = resample(&weights, resampling, reference.is_some(), rng);
    }

    // Trace the chosen particle back to time 0.
    let mut k = rng.gen_range(0..p);
    let mut pieces = Vec::with_capacity(history.len());
    for (anc, segs) in history.iter().rev() {
        pieces.push(&segs[k]);
        k = anc[k];
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for seg in pieces.into_iter().rev() {
        times.extend_from_slice(&seg.times);
        states.extend_from_slice(&seg.states);
    }
    let path = Trajectory::new(initial[k], times, states, t_end)?;
    Ok(ParticleEstimate { log_likelihood: log_lik, path: Some(path), degenerate: false })
}

fn gaussian_points(obs: &ObservationSet) -> Result<&[GaussianObservation]> {
    match obs {
        ObservationSet::GaussianPoints(points) => Ok(points),
        ObservationSet::PoissonEvents { .. } => Err(MjpError::Unsupported(
            "the particle filter handles Gaussian point observations only".into(),
        )),
    }
}

/// Bootstrap particle filter for `θ`.
pub fn bootstrap_particle_filter<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta: &ModelParams,
    obs: &ObservationSet,
    t_end: f64,
    particles: usize,
    resampling: Resampling,
    rng: &mut R,
) -> Result<ParticleEstimate> {
    let a = build_rate_matrix(spec, theta)?;
    let points = gaussian_points(obs)?;
    particle_filter(&a, &spec.initial_distribution(), points, t_end, particles, resampling, None, rng)
}

/// Conditional SMC for `θ` keeping `reference` as particle 0.
pub fn conditional_particle_filter<R: Rng + ?Sized>(
    spec: &ModelSpec,
    theta: &ModelParams,
    obs: &ObservationSet,
    reference: &Trajectory,
    particles: usize,
    rng: &mut R,
) -> Result<ParticleEstimate> {
    let a = build_rate_matrix(spec, theta)?;
    let points = gaussian_points(obs)?;
    particle_filter(
        &a,
        &spec.initial_distribution(),
        points,
        reference.t_end(),
        particles,
        Resampling::Multinomial,
        Some(reference),
        rng,
    )
}

/// PMMH step. A missing carried estimate (fresh chain, or after another
/// kernel moved the state) is first refreshed by conditional SMC around the
/// current path, which keeps the extended target invariant.
pub fn pmmh_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &ModelSpec,
    obs: &ObservationSet,
    particles: usize,
    resampling: Resampling,
    rng: &mut R,
) -> Result<StepInfo> {
    let t_end = state.traj.t_end();
    let current = match state.log_lik_estimate {
        Some(v) => v,
        None => {
            let est = conditional_particle_filter(spec, &state.theta, obs, &state.traj, particles, rng)?;
            if let Some(path) = est.path {
                state.traj = path;
            }
            state.log_lik_estimate = Some(est.log_likelihood);
            est.log_likelihood
        }
    };
    let proposed = spec.proposal.propose(&state.theta, rng);
    if !proposed.is_valid() {
        mh_accept(f64::NEG_INFINITY, rng);
        return Ok(StepInfo { accepted: false, log_marginal: current });
    }
    let est = bootstrap_particle_filter(spec, &proposed, obs, t_end, particles, resampling, rng)?;
    let log_ratio = est.log_likelihood - current + log_prior(spec, &proposed)
        - log_prior(spec, &state.theta)
        + spec.proposal.log_proposal_ratio(&state.theta, &proposed);
    let accepted = mh_accept(log_ratio, rng) && est.path.is_some();
    if !accepted {
        return Ok(StepInfo { accepted: false, log_marginal: current });
    }
    state.theta = proposed;
    state.traj = est.path.expect("checked above");
    state.log_lik_estimate = Some(est.log_likelihood);
    Ok(StepInfo { accepted: true, log_marginal: est.log_likelihood })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridhmm::exact_marginal_likelihood;
    use crate::models::tests::spec_for;
    use crate::models::Family;
    use crate::rng::chain_rng;

    fn points() -> Vec<GaussianObservation> {
        vec![
            GaussianObservation { time: 0.5, value: 0.0, sigma2: 0.5 },
            GaussianObservation { time: 1.5, value: 1.0, sigma2: 0.5 },
            GaussianObservation { time: 2.0, value: 1.0, sigma2: 0.5 },
        ]
    }

    #[test]
    fn single_state_is_exact() {
        let a = RateMatrix::from_rows(&[vec![0.0]]).unwrap();
        let pts = points();
        let want: f64 = pts.iter().map(|o| o.log_likelihood(0)).sum();
        let mut rng = chain_rng(1, 0);
        for _ in 0..5 {
            let est = particle_filter(&a, &[1.0], &pts, 3.0, 7, Resampling::Multinomial, None, &mut rng).unwrap();
            assert!((est.log_likelihood - want).abs() < 1e-12);
            assert_eq!(est.path.unwrap().n_transitions(), 0);
        }
    }

    #[test]
    fn estimate_is_unbiased() {
        let a = RateMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.7, -0.7]]).unwrap();
        let pi0 = [0.5, 0.5];
        let pts = points();
        let obs = ObservationSet::gaussian(pts.clone()).unwrap();
        let exact = exact_marginal_likelihood(&a, &pi0, &obs, 3.0, None).unwrap().exp();
        let mut rng = chain_rng(2, 0);
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let xs: Vec<f64> = (0..5000)
                .map(|_| particle_filter(&a, &pi0, &pts, 3.0, 10, scheme, None, &mut rng).unwrap().log_likelihood.exp())
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
            let se = sd / (xs.len() as f64).sqrt();
            assert!((m - exact).abs() < 4.0 * se, "{scheme:?}: {m} vs {exact} (se {se})");
        }
    }

    #[test]
    fn conditional_keeps_reference_shape() {
        let a = RateMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.7, -0.7]]).unwrap();
        let reference = Trajectory::new(1, vec![0.8, 2.4], vec![0, 1], 3.0).unwrap();
        let mut rng = chain_rng(3, 0);
        let est = particle_filter(&a, &[0.5, 0.5], &points(), 3.0, 1, Resampling::Multinomial, Some(&reference), &mut rng)
            .unwrap();
        // one particle: the reference is returned unchanged
        assert_eq!(est.path.unwrap(), reference);
    }

    #[test]
    fn degenerate_weights_are_flagged() {
        let a = RateMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let pts = vec![GaussianObservation { time: 1.0, value: 1e200, sigma2: 1e-300 }];
        let mut rng = chain_rng(4, 0);
        let est = particle_filter(&a, &[1.0, 0.0], &pts, 2.0, 5, Resampling::Multinomial, None, &mut rng).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.log_likelihood, f64::NEG_INFINITY);
    }

    #[test]
    fn poisson_events_rejected() {
        let spec = spec_for(Family::Mmpp);
        let obs = ObservationSet::poisson_events(vec![0.5], vec![1.0, 2.0]).unwrap();
        let mut rng = chain_rng(5, 0);
        let theta = ModelParams::new(vec![1.0, 1.0, 1.0, 2.0]);
        assert!(matches!(
            bootstrap_particle_filter(&spec, &theta, &obs, 1.0, 5, Resampling::Multinomial, &mut rng),
            Err(MjpError::Unsupported(_))
        ));
    }
}
