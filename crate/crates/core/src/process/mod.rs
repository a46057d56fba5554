//! Markov jump process fundamentals.

mod simulate;
mod stats;

pub use simulate::{
    OMEGA_TOL,
    check_omega, collapse_grid, extend_path, gillespie_simulate, merge_times,
    sample_categorical, sample_thinned_times, simulate_uniformized, thin_and_merge,
    transition_matrix,
};
pub use stats::{
    path_statistics, poisson_process_log_density, trajectory_log_likelihood, PathStatistics,
};

use crate::error::{MjpError, Result};

/// Absolute tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-10;

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(MjpError::Config(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(SquareMatrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MjpError::Config(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Generator of an MJP, optionally piecewise-constant in time.
///
/// Segment `k` covers `[breakpoints[k-1], breakpoints[k])`, with the first
/// segment starting at time 0 and the last one extending forever. Lookups are
/// right-continuous: at a breakpoint the later segment applies.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    dim: usize,
    breakpoints: Vec<f64>,
    segments: Vec<SquareMatrix>,
}

impl RateMatrix {
    pub fn new(entries: SquareMatrix) -> Result<Self> {
        validate_generator(&entries, None)?;
        Ok(RateMatrix { dim: entries.dim(), breakpoints: Vec::new(), segments: vec![entries] })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SquareMatrix::from_rows(rows)?)
    }

    /// Builds a generator from its off-diagonal rates; the diagonal is filled
    /// in as minus the row sum.
    pub fn from_off_diagonal(dim: usize, rate: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(generator_from_off_diagonal(dim, rate))
    }

    pub fn piecewise(breakpoints: Vec<f64>, segments: Vec<SquareMatrix>) -> Result<Self> {
        if segments.is_empty() {
            return Err(MjpError::InvalidRateMatrix("no segments".into()));
        }
        if segments.len() != breakpoints.len() + 1 {
            return Err(MjpError::InvalidRateMatrix(format!(
                "{} segments need {} breakpoints, got {}",
                segments.len(),
                segments.len() - 1,
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0))
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(MjpError::InvalidRateMatrix(
                "breakpoints must be positive and strictly increasing".into(),
            ));
        }
        let dim = segments[0].dim();
        for (k, seg) in segments.iter().enumerate() {
            if seg.dim() != dim {
                return Err(MjpError::InvalidRateMatrix(format!(
                    "segment {k} has dimension {}, expected {dim}",
                    seg.dim()
                )));
            }
            validate_generator(seg, Some(k))?;
        }
        Ok(RateMatrix { dim, breakpoints, segments })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.breakpoints.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[SquareMatrix] {
        &self.segments
    }

    #[inline]
    pub fn segment_index(&self, t: f64) -> usize {
        if self.breakpoints.is_empty() {
            0
        } else {
            self.breakpoints.partition_point(|b| *b <= t)
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> &SquareMatrix {
        &self.segments[self.segment_index(t)]
    }

    /// The homogeneous generator; fails for time-dependent matrices.
    pub fn homogeneous(&self) -> Result<&SquareMatrix> {
        if self.is_time_dependent() {
            Err(MjpError::Unsupported("time-dependent rate matrix".into()))
        } else {
            Ok(&self.segments[0])
        }
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize, t: f64) -> f64 {
        self.at(t).get(i, j)
    }

    /// Total exit rate `A_i = -A_ii` at time `t`.
    #[inline]
    pub fn exit_rate(&self, i: usize, t: f64) -> f64 {
        -self.at(t).get(i, i)
    }

    /// `max_i A_i` over every segment, with the maximising state.
    pub fn max_exit_rate_with_state(&self) -> (f64, usize) {
        let mut best = (0.0, 0);
        for seg in &self.segments {
            for i in 0..self.dim {
                let r = -seg.get(i, i);
                if r > best.0 {
                    best = (r, i);
                }
            }
        }
        best
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.max_exit_rate_with_state().0
    }

    /// Iterates over the constant pieces of the generator inside `[from, to)`.
    pub fn pieces(&self, from: f64, to: f64) -> impl Iterator<Item = (f64, f64, &SquareMatrix)> + '_ {
        let first = self.segment_index(from);
        let bps = &self.breakpoints;
        (first..self.segments.len())
            .map(move |k| {
                let start = if k == first { from } else { bps[k - 1] };
                let end = if k < bps.len() { bps[k].min(to) } else { to };
                (start, end, &self.segments[k])
            })
            .take_while(move |(start, _, _)| *start < to)
            .filter(|(s, e, _)| e > s)
    }
}

pub(crate) fn generator_from_off_diagonal(
    dim: usize,
    rate: impl Fn(usize, usize) -> f64,
) -> SquareMatrix {
    let mut m = SquareMatrix::zeros(dim);
    for i in 0..dim {
        let mut total = 0.0;
        for j in 0..dim {
            if i != j {
                let r = rate(i, j);
                m.set(i, j, r);
                total += r;
            }
        }
        m.set(i, i, -total);
    }
    m
}

fn validate_generator(m: &SquareMatrix, segment: Option<usize>) -> Result<()> {
    let at = |msg: String| match segment {
        Some(k) => MjpError::InvalidRateMatrix(format!("segment {k}: {msg}")),
        None => MjpError::InvalidRateMatrix(msg),
    };
    if m.dim() == 0 {
        return Err(at("dimension must be positive".into()));
    }
    for i in 0..m.dim() {
        let mut sum = 0.0;
        for j in 0..m.dim() {
            let v = m.get(i, j);
            if !v.is_finite() {
                return Err(at(format!("entry ({i},{j}) is not finite")));
            }
            if i != j && v < 0.0 {
                return Err(at(format!("off-diagonal entry ({i},{j}) = {v} is negative")));
            }
            sum += v;
        }
        if sum.abs() > ROW_SUM_TOL {
            return Err(at(format!("row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Right-continuous piecewise-constant path on `[0, t_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    s0: usize,
    jump_times: Vec<f64>,
    jump_states: Vec<usize>,
    t_end: f64,
}

impl Trajectory {
    pub fn new(s0: usize, jump_times: Vec<f64>, jump_states: Vec<usize>, t_end: f64) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(MjpError::InvalidTrajectory(format!("t_end = {t_end} must be positive")));
        }
        if jump_times.len() != jump_states.len() {
            return Err(MjpError::InvalidTrajectory(format!(
                "{} jump times but {} jump states",
                jump_times.len(),
                jump_states.len()
            )));
        }
        let mut prev_t = 0.0;
        let mut prev_s = s0;
        for (k, (&t, &s)) in jump_times.iter().zip(&jump_states).enumerate() {
            if !(t > prev_t && t < t_end) {
                return Err(MjpError::InvalidTrajectory(format!(
                    "jump time {k} = {t} is not increasing inside (0, {t_end})"
                )));
            }
            if s == prev_s {
                return Err(MjpError::InvalidTrajectory(format!(
                    "jump {k} at t = {t} does not change state ({s})"
                )));
            }
            prev_t = t;
            prev_s = s;
        }
        Ok(Trajectory { s0, jump_times, jump_states, t_end })
    }

    pub fn constant(state: usize, t_end: f64) -> Result<Self> {
        Self::new(state, Vec::new(), Vec::new(), t_end)
    }

    pub fn initial_state(&self) -> usize {
        self.s0
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_states(&self) -> &[usize] {
        &self.jump_states
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_transitions(&self) -> usize {
        self.jump_times.len()
    }

    pub fn final_state(&self) -> usize {
        self.jump_states.last().copied().unwrap_or(self.s0)
    }

    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|w| *w <= t);
        if k == 0 {
            self.s0
        } else {
            self.jump_states[k - 1]
        }
    }

    /// Largest state index visited.
    pub fn max_state(&self) -> usize {
        self.jump_states.iter().copied().fold(self.s0, usize::max)
    }

    /// Constant pieces `(start, end, state)` covering `[0, t_end]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let n = self.jump_times.len();
        (0..=n).map(move |k| {
            let start = if k == 0 { 0.0 } else { self.jump_times[k - 1] };
            let end = if k == n { self.t_end } else { self.jump_times[k] };
            let state = if k == 0 { self.s0 } else { self.jump_states[k - 1] };
            (start, end, state)
        })
    }

    /// Uniformized representation: real jumps plus `thinned` self-transition
    /// times, with a state label for time 0 and for every grid point.
    pub fn expand(&self, thinned: &[f64]) -> Grid {
        let times = merge_times(&self.jump_times, thinned);
        let mut states = Vec::with_capacity(times.len() + 1);
        states.push(self.s0);
        states.extend(times.iter().map(|&w| self.state_at(w)));
        Grid { times, states: Some(states), t_end: self.t_end }
    }
}

/// Candidate jump times `W ⊂ (0, t_end)`, optionally labelled with the states
/// of the embedded discrete-time chain (`states[0]` is the state at time 0).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub times: Vec<f64>,
    pub states: Option<Vec<usize>>,
    pub t_end: f64,
}

impl Grid {
    pub fn new(times: Vec<f64>, states: Option<Vec<usize>>, t_end: f64) -> Result<Self> {
        if times.iter().any(|t| !(*t > 0.0 && *t < t_end)) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MjpError::Precondition(
                "grid times must be strictly increasing inside (0, t_end)".into(),
            ));
        }
        if let Some(v) = &states {
            if v.len() != times.len() + 1 {
                return Err(MjpError::Precondition(format!(
                    "grid has {} times but {} state labels (expected {})",
                    times.len(),
                    v.len(),
                    times.len() + 1
                )));
            }
        }
        Ok(Grid { times, states, t_end })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
