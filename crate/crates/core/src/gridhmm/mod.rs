//! Discrete-time HMM machinery on a uniformization grid.
//!
//! A grid `W = (w_1 < … < w_K)` splits `[0, t_end]` into the intervals
//! `[0, w_1), [w_1, w_2), …, [w_K, t_end]`. The embedded chain holds state
//! `v_i` on interval `i`, moves with `B = I + A/Ω` at every grid point, and
//! emits all observations falling in the interval.

mod forward;
mod oracle;

pub use forward::{backward_sample, forward_filter, forward_pass, FilterMessages, Transitions};
pub use oracle::exact_marginal_likelihood;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{MjpError, Result};
use crate::process::Trajectory;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianObservation {
    pub time: f64,
    pub value: f64,
    pub sigma2: f64,
}

impl GaussianObservation {
    #[inline]
    pub fn log_likelihood(&self, state: usize) -> f64 {
        let r = self.value - state as f64;
        -0.5 * (2.0 * PI * self.sigma2).ln() - r * r / (2.0 * self.sigma2)
    }
}

/// Observations of a latent path.
#[derive(Clone, Debug, PartialEq)]
pub enum ObservationSet {
    /// Noisy point readings with mean equal to the state index.
    GaussianPoints(Vec<GaussianObservation>),
    /// Event times of a Poisson process whose rate is `rates[S(t)]`.
    PoissonEvents { times: Vec<f64>, rates: Vec<f64> },
}

impl ObservationSet {
    pub fn gaussian(points: Vec<GaussianObservation>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].time > w[1].time) {
            return Err(MjpError::Config("observation times must be sorted".into()));
        }
        for p in &points {
            if !(p.sigma2.is_finite() && p.sigma2 > 0.0) {
                return Err(MjpError::Config(format!(
                    "observation at t = {} has non-positive variance {}",
                    p.time, p.sigma2
                )));
            }
            if !(p.time.is_finite() && p.time >= 0.0 && p.value.is_finite()) {
                return Err(MjpError::Config(format!("invalid observation {p:?}")));
            }
        }
        Ok(ObservationSet::GaussianPoints(points))
    }

    pub fn poisson_events(times: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(MjpError::Config("event times must be sorted".into()));
        }
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(MjpError::Config("event times must be non-negative".into()));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(MjpError::Config(format!("emission rates {rates:?} must be positive")));
        }
        Ok(ObservationSet::PoissonEvents { times, rates })
    }

    pub fn len(&self) -> usize {
        match self {
            ObservationSet::GaussianPoints(p) => p.len(),
            ObservationSet::PoissonEvents { times, .. } => times.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Latest observation time.
    pub fn last_time(&self) -> Option<f64> {
        match self {
            ObservationSet::GaussianPoints(p) => p.last().map(|o| o.time),
            ObservationSet::PoissonEvents { times, .. } => times.last().copied(),
        }
    }

    pub fn check_horizon(&self, t_end: f64) -> Result<()> {
        match self.last_time() {
            Some(t) if t > t_end => Err(MjpError::Config(format!(
                "observation at t = {t} lies beyond t_end = {t_end}"
            ))),
            _ => Ok(()),
        }
    }

    /// Number of events falling in each state of `traj`.
    pub fn events_per_state(&self, traj: &Trajectory, n_states: usize) -> Vec<u64> {
        let mut counts = vec![0; n_states];
        if let ObservationSet::PoissonEvents { times, .. } = self {
            for &t in times {
                counts[traj.state_at(t)] += 1;
            }
        }
        counts
    }

    /// Gaussian readings of `traj` at `times` with noise variance `sigma2`.
    pub fn simulate_gaussian<R: Rng + ?Sized>(
        traj: &Trajectory,
        times: &[f64],
        sigma2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sd = sigma2.sqrt();
        let points = times
            .iter()
            .map(|&time| {
                let z: f64 = rng.sample(StandardNormal);
                GaussianObservation { time, value: traj.state_at(time) as f64 + sd * z, sigma2 }
            })
            .collect();
        Self::gaussian(points)
    }

    /// Events of a Poisson process on `[0, t_end)` whose rate is `rates[S(t)]`.
    pub fn simulate_poisson_events<R: Rng + ?Sized>(
        traj: &Trajectory,
        rates: &[f64],
        rng: &mut R,
    ) -> Result<Self> {
        if traj.max_state() >= rates.len() {
            return Err(MjpError::Config(format!(
                "path visits state {} but only {} emission rates are given",
                traj.max_state(),
                rates.len()
            )));
        }
        let mut times = Vec::new();
        for (start, end, state) in traj.segments() {
            let mut t = start;
            loop {
                t += rng.sample::<f64, _>(Exp1) / rates[state];
                if t >= end {
                    break;
                }
                times.push(t);
            }
        }
        Self::poisson_events(times, rates.to_vec())
    }

    /// Same data with the emission rates replaced (Poisson events only).
    pub fn with_rates(&self, new_rates: &[f64]) -> Self {
        match self {
            ObservationSet::PoissonEvents { times, .. } => {
                ObservationSet::PoissonEvents { times: times.clone(), rates: new_rates.to_vec() }
            }
            other => other.clone(),
        }
    }
}

/// Log-likelihood of the observations in `[a, b)` if the path sits in `state`
/// throughout.
pub fn interval_log_likelihood(obs: &ObservationSet, state: usize, a: f64, b: f64) -> f64 {
    match obs {
        ObservationSet::GaussianPoints(points) => points
            .iter()
            .filter(|p| p.time >= a && p.time < b)
            .map(|p| p.log_likelihood(state))
            .sum(),
        ObservationSet::PoissonEvents { times, rates } => {
            let k = times.iter().filter(|&&t| t >= a && t < b).count();
            let rate = rates[state];
            k as f64 * rate.ln() - rate * (b - a)
        }
    }
}

/// Per-interval, per-state observation log-likelihoods for a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodTable {
    dim: usize,
    data: Vec<f64>,
}

impl LikelihoodTable {
    /// Table for the `|times| + 1` intervals induced by `times` on
    /// `[0, t_end]`. An observation at a grid time belongs to the interval
    /// starting there; one at `t_end` belongs to the last interval.
    /// `rates` overrides the emission rates of Poisson observations.
    pub fn build(
        obs: &ObservationSet,
        times: &[f64],
        t_end: f64,
        dim: usize,
        rates: Option<&[f64]>,
    ) -> Result<Self> {
        let n_int = times.len() + 1;
        let mut data = vec![0.0; n_int * dim];
        match obs {
            ObservationSet::GaussianPoints(points) => {
                for p in points {
                    let i = times.partition_point(|w| *w <= p.time);
                    let row = &mut data[i * dim..(i + 1) * dim];
                    for (s, v) in row.iter_mut().enumerate() {
                        *v += p.log_likelihood(s);
                    }
                }
            }
            ObservationSet::PoissonEvents { times: events, rates: own } => {
                let rates = rates.unwrap_or(own);
                if rates.len() != dim {
                    return Err(MjpError::Config(format!(
                        "{} emission rates for {dim} states",
                        rates.len()
                    )));
                }
                let mut counts = vec![0u64; n_int];
                for &t in events {
                    counts[times.partition_point(|w| *w <= t)] += 1;
                }
                let log_rates: Vec<f64> = rates.iter().map(|r| r.ln()).collect();
                for i in 0..n_int {
                    let lo = if i == 0 { 0.0 } else { times[i - 1] };
                    let hi = if i == times.len() { t_end } else { times[i] };
                    let k = counts[i] as f64;
                    for s in 0..dim {
                        data[i * dim + s] = k * log_rates[s] - rates[s] * (hi - lo);
                    }
                }
            }
        }
        Ok(LikelihoodTable { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, |r| r.len());
        LikelihoodTable { dim, data: rows.iter().flatten().copied().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_intervals(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(time: f64, value: f64) -> GaussianObservation {
        GaussianObservation { time, value, sigma2: 1.0 }
    }

    #[test]
    fn interval_examples() {
        let o = ObservationSet::gaussian(vec![obs(5.0, 1.0)]).unwrap();
        assert_eq!(interval_log_likelihood(&o, 0, 0.0, 1.0), 0.0);
        let want = -0.5 * (2.0 * PI).ln();
        assert!((interval_log_likelihood(&o, 1, 4.0, 6.0) - want).abs() < 1e-15);
        let p = ObservationSet::poisson_events(vec![0.5, 1.0, 2.0, 2.5], vec![1.0, 2.0]).unwrap();
        assert!((interval_log_likelihood(&p, 1, 0.0, 3.0) - (4.0 * 2f64.ln() - 6.0)).abs() < 1e-14);
    }

    #[test]
    fn table_assigns_boundary_observations_forward() {
        let o = ObservationSet::gaussian(vec![obs(0.0, 0.0), obs(1.0, 0.0), obs(3.0, 0.0)]).unwrap();
        let t = LikelihoodTable::build(&o, &[1.0, 2.0], 3.0, 2, None).unwrap();
        let c = GaussianObservation { time: 0.0, value: 0.0, sigma2: 1.0 }.log_likelihood(0);
        assert_eq!(t.n_intervals(), 3);
        assert_eq!(t.row(0)[0], c);
        assert_eq!(t.row(1)[0], c);
        assert_eq!(t.row(2)[0], c);
    }

    #[test]
    fn table_matches_interval_function() {
        let p = ObservationSet::poisson_events(vec![0.1, 0.7, 1.2, 2.9], vec![0.5, 3.0]).unwrap();
        let grid = [0.7, 1.5];
        let t = LikelihoodTable::build(&p, &grid, 3.0, 2, None).unwrap();
        let bounds = [(0.0, 0.7), (0.7, 1.5), (1.5, 3.0)];
        for (i, (a, b)) in bounds.iter().enumerate() {
            for s in 0..2 {
                assert!((t.row(i)[s] - interval_log_likelihood(&p, s, *a, *b)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(ObservationSet::gaussian(vec![GaussianObservation { time: 1.0, value: 0.0, sigma2: 0.0 }]).is_err());
        assert!(ObservationSet::gaussian(vec![obs(2.0, 0.0), obs(1.0, 0.0)]).is_err());
        assert!(ObservationSet::poisson_events(vec![1.0], vec![0.0, 1.0]).is_err());
    }
}
