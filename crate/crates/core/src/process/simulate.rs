use log::warn;
use rand::Rng;
use rand_distr::Exp1;

use super::{Grid, RateMatrix, SquareMatrix, Trajectory};
use crate::error::{MjpError, Result};

/// Slack allowed when comparing Ω against `max_i A_i`.
pub const OMEGA_TOL: f64 = 1e-12;

/// Index drawn with probability proportional to `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

fn validate_initial(pi0: &[f64], dim: usize) -> Result<()> {
    if pi0.len() != dim {
        return Err(MjpError::Config(format!(
            "initial distribution has {} entries for {dim} states",
            pi0.len()
        )));
    }
    if pi0.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(MjpError::Config("initial distribution has a negative entry".into()));
    }
    let s: f64 = pi0.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(MjpError::Config(format!("initial distribution sums to {s}")));
    }
    Ok(())
}

fn validate_horizon(t_end: f64) -> Result<()> {
    if t_end.is_finite() && t_end > 0.0 {
        Ok(())
    } else {
        Err(MjpError::Config(format!("t_end = {t_end} must be positive")))
    }
}

/// Exact wait-and-jump simulation of a homogeneous MJP on `[0, t_end]`.
pub fn gillespie_simulate<R: Rng + ?Sized>(
    a: &RateMatrix,
    pi0: &[f64],
    t_end: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if a.is_time_dependent() {
        return Err(MjpError::Unsupported(
            "Gillespie simulation needs a homogeneous generator; use simulate_uniformized".into(),
        ));
    }
    validate_initial(pi0, a.dim())?;
    validate_horizon(t_end)?;
    let s0 = sample_categorical(pi0, rng);
    let mut times = Vec::new();
    let mut states = Vec::new();
    gillespie_extend(a.homogeneous()?, s0, 0.0, t_end, &mut times, &mut states, rng);
    Trajectory::new(s0, times, states, t_end)
}

fn gillespie_extend<R: Rng + ?Sized>(
    a: &SquareMatrix,
    mut state: usize,
    from: f64,
    to: f64,
    times: &mut Vec<f64>,
    states: &mut Vec<usize>,
    rng: &mut R,
) -> usize {
    let n = a.dim();
    let mut t = from;
    loop {
        let exit = -a.get(state, state);
        if exit <= 0.0 {
            return state;
        }
        t += rng.sample::<f64, _>(Exp1) / exit;
        if t >= to {
            return state;
        }
        let u = rng.gen::<f64>() * exit;
        let mut acc = 0.0;
        let mut next = state;
        for j in 0..n {
            if j == state {
                continue;
            }
            let r = a.get(state, j);
            if r > 0.0 {
                acc += r;
                next = j;
                if u < acc {
                    break;
                }
            }
        }
        state = next;
        times.push(t);
        states.push(state);
    }
}

/// Continues a path from `state` at time `from` until `to`, appending jumps.
///
/// Homogeneous generators use Gillespie's algorithm; time-dependent ones are
/// simulated by thinning a dominating Poisson process. Returns the state at
/// `to`.
pub fn extend_path<R: Rng + ?Sized>(
    a: &RateMatrix,
    state: usize,
    from: f64,
    to: f64,
    times: &mut Vec<f64>,
    states: &mut Vec<usize>,
    rng: &mut R,
) -> usize {
    if !a.is_time_dependent() {
        return gillespie_extend(&a.segments()[0], state, from, to, times, states, rng);
    }
    let omega = a.max_exit_rate();
    if omega <= 0.0 {
        return state;
    }
    let mut state = state;
    let mut t = from;
    loop {
        t += rng.sample::<f64, _>(Exp1) / omega;
        if t >= to {
            return state;
        }
        let m = a.at(t);
        let u = rng.gen::<f64>() * omega;
        let mut acc = 0.0;
        for j in 0..a.dim() {
            if j == state {
                continue;
            }
            acc += m.get(state, j);
            if u < acc {
                state = j;
                times.push(t);
                states.push(j);
                break;
            }
        }
    }
}

/// Checks Ω against `max_i A_i`; equality is allowed with a warning.
pub fn check_omega(a: &RateMatrix, omega: f64) -> Result<()> {
    let (max_rate, state) = a.max_exit_rate_with_state();
    if !omega.is_finite() || omega < max_rate - OMEGA_TOL {
        return Err(MjpError::Precondition(format!(
            "Ω = {omega} is below the exit rate {max_rate} of state {state}"
        )));
    }
    if omega <= 0.0 {
        return Err(MjpError::Precondition(format!("Ω = {omega} must be positive")));
    }
    if omega <= max_rate + OMEGA_TOL {
        warn!("Ω = {omega} equals the exit rate of state {state}; the sampler may not be ergodic");
    }
    Ok(())
}

/// Draws the thinned candidate times `U` for `traj`: an inhomogeneous Poisson
/// process with intensity `Ω - A_{S(t)}(t)`, sampled piece by piece over the
/// constant stretches of the path and of the generator.
pub fn sample_thinned_times<R: Rng + ?Sized>(
    traj: &Trajectory,
    a: &RateMatrix,
    omega: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_omega(a, omega)?;
    let mut thinned = Vec::new();
    for (start, end, state) in traj.segments() {
        for (lo, hi, m) in a.pieces(start, end) {
            let rate = omega + m.get(state, state);
            if rate <= 0.0 {
                continue;
            }
            let mut t = lo;
            loop {
                t += rng.sample::<f64, _>(Exp1) / rate;
                if t >= hi {
                    break;
                }
                thinned.push(t);
            }
        }
    }
    Ok(thinned)
}

/// Sorted union of two sorted time lists.
pub fn merge_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `W = T ∪ U` with state information discarded.
pub fn thin_and_merge<R: Rng + ?Sized>(
    traj: &Trajectory,
    a: &RateMatrix,
    omega: f64,
    rng: &mut R,
) -> Result<Grid> {
    let thinned = sample_thinned_times(traj, a, omega, rng)?;
    Ok(Grid { times: merge_times(traj.jump_times(), &thinned), states: None, t_end: traj.t_end() })
}

/// `B = I + A(t)/Ω`.
pub fn transition_matrix(a: &RateMatrix, omega: f64, t: f64) -> Result<SquareMatrix> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(MjpError::Precondition(format!("Ω = {omega} must be positive")));
    }
    let gen = a.at(t);
    let n = gen.dim();
    let mut b = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { 1.0 + gen.get(i, i) / omega } else { gen.get(i, j) / omega };
            b.set(i, j, v);
        }
        let d = b.get(i, i);
        if d < -OMEGA_TOL {
            return Err(MjpError::Precondition(format!(
                "Ω = {omega} gives negative self-transition probability {d} in state {i}"
            )));
        }
        if d < 0.0 {
            b.set(i, i, 0.0);
        }
    }
    Ok(b)
}

/// Drops every self-transition from a labelled grid.
pub fn collapse_grid(grid: &Grid) -> Result<Trajectory> {
    let states = grid
        .states
        .as_ref()
        .ok_or_else(|| MjpError::Precondition("grid carries no state labels".into()))?;
    if states.len() != grid.times.len() + 1 {
        return Err(MjpError::Precondition("grid state labels do not match its times".into()));
    }
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    let mut prev = states[0];
    for (&w, &v) in grid.times.iter().zip(&states[1..]) {
        if v != prev {
            times.push(w);
            jumps.push(v);
            prev = v;
        }
    }
    Trajectory::new(states[0], times, jumps, grid.t_end)
}

/// Simulates an MJP by uniformization: a rate-Ω Poisson grid on `(0, t_end)`
/// labelled by the discrete-time chain with transitions `I + A(w)/Ω`.
pub fn simulate_uniformized<R: Rng + ?Sized>(
    a: &RateMatrix,
    pi0: &[f64],
    t_end: f64,
    omega: f64,
    rng: &mut R,
) -> Result<Grid> {
    validate_initial(pi0, a.dim())?;
    validate_horizon(t_end)?;
    check_omega(a, omega)?;
    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.sample::<f64, _>(Exp1) / omega;
        if t >= t_end {
            break;
        }
        times.push(t);
    }
    let mut states = Vec::with_capacity(times.len() + 1);
    let mut state = sample_categorical(pi0, rng);
    states.push(state);
    let mut cached: Option<(usize, SquareMatrix)> = None;
    for &w in &times {
        let seg = a.segment_index(w);
        if cached.as_ref().map(|(k, _)| *k) != Some(seg) {
            cached = Some((seg, transition_matrix(a, omega, w)?));
        }
        let b = &cached.as_ref().expect("cached transition matrix").1;
        state = sample_categorical(b.row(state), rng);
        states.push(state);
    }
    Ok(Grid { times, states: Some(states), t_end })
}
