use rand::Rng;

use super::{LikelihoodTable, ObservationSet};
use crate::error::{MjpError, Result};
use crate::process::{sample_categorical, transition_matrix, Grid, RateMatrix, SquareMatrix};

/// Transition matrices for the steps of a grid; step `k` moves the chain
/// from `v_k` to `v_{k+1}` at grid time `w_{k+1}`.
#[derive(Clone, Debug)]
pub enum Transitions {
    Constant(SquareMatrix),
    PerStep { matrices: Vec<SquareMatrix>, step_matrix: Vec<usize> },
}

impl Transitions {
    /// `B(w) = I + A(w)/Ω` at every grid time, sharing one matrix per
    /// generator segment.
    pub fn uniformized(a: &RateMatrix, omega: f64, times: &[f64]) -> Result<Self> {
        if !a.is_time_dependent() {
            return Ok(Transitions::Constant(transition_matrix(a, omega, 0.0)?));
        }
        let segments = a.segments().len();
        let mut slot = vec![usize::MAX; segments];
        let mut matrices = Vec::new();
        let mut step_matrix = Vec::with_capacity(times.len());
        for &w in times {
            let seg = a.segment_index(w);
            if slot[seg] == usize::MAX {
                slot[seg] = matrices.len();
                matrices.push(transition_matrix(a, omega, w)?);
            }
            step_matrix.push(slot[seg]);
        }
        Ok(Transitions::PerStep { matrices, step_matrix })
    }

    #[inline]
    pub fn step(&self, k: usize) -> &SquareMatrix {
        match self {
            Transitions::Constant(b) => b,
            Transitions::PerStep { matrices, step_matrix } => &matrices[step_matrix[k]],
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Transitions::Constant(b) => Some(b.dim()),
            Transitions::PerStep { matrices, .. } => matrices.first().map(|m| m.dim()),
        }
    }
}

/// Forward-filtering output: normalised filtered distributions
/// `P(v_i | observations in intervals 0..=i)` and the per-step log normalisers,
/// whose sum is the log marginal likelihood.
#[derive(Clone, Debug)]
pub struct FilterMessages {
    dim: usize,
    filtered: Vec<f64>,
    pub log_normalizers: Vec<f64>,
    pub log_marginal: f64,
    /// Set when some step assigned zero probability to every state.
    pub degenerate: bool,
}

impl FilterMessages {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.log_normalizers.len()
    }

    pub fn filtered(&self, i: usize) -> &[f64] {
        &self.filtered[i * self.dim..(i + 1) * self.dim]
    }
}

/// Forward pass over a precomputed likelihood table with one row per interval.
pub fn forward_filter(
    table: &LikelihoodTable,
    transitions: &Transitions,
    pi0: &[f64],
) -> Result<FilterMessages> {
    let n = pi0.len();
    if table.dim() != n || transitions.dim().is_some_and(|d| d != n) {
        return Err(MjpError::Precondition("state dimensions disagree".into()));
    }
    let n_int = table.n_intervals();
    let mut filtered = vec![0.0; n_int * n];
    let mut log_normalizers = Vec::with_capacity(n_int);
    let mut pred = pi0.to_vec();
    for i in 0..n_int {
        if i > 0 {
            let b = transitions.step(i - 1);
            let prev = &filtered[(i - 1) * n..i * n];
            pred.iter_mut().for_each(|p| *p = 0.0);
            for (s, &p) in prev.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (t, q) in pred.iter_mut().enumerate() {
                    *q += p * b.get(s, t);
                }
            }
        }
        let lik = table.row(i);
        let max = lik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut filtered[i * n..(i + 1) * n];
        let mut z = 0.0;
        if max.is_finite() {
            for s in 0..n {
                let w = pred[s] * (lik[s] - max).exp();
                out[s] = w;
                z += w;
            }
        }
        if !(z > 0.0 && z.is_finite()) {
            log_normalizers.push(f64::NEG_INFINITY);
            return Ok(FilterMessages {
                dim: n,
                filtered,
                log_normalizers,
                log_marginal: f64::NEG_INFINITY,
                degenerate: true,
            });
        }
        out.iter_mut().for_each(|v| *v /= z);
        log_normalizers.push(z.ln() + max);
    }
    let log_marginal = log_normalizers.iter().sum();
    Ok(FilterMessages { dim: n, filtered, log_normalizers, log_marginal, degenerate: false })
}

/// Forward pass over `grid` given per-step transitions and observations;
/// `rates` overrides Poisson emission rates.
pub fn forward_pass(
    grid: &Grid,
    transitions: &Transitions,
    pi0: &[f64],
    obs: &ObservationSet,
    rates: Option<&[f64]>,
) -> Result<FilterMessages> {
    let table = LikelihoodTable::build(obs, &grid.times, grid.t_end, pi0.len(), rates)?;
    forward_filter(&table, transitions, pi0)
}

/// Draws the grid state sequence `V` (length `K + 1`) from its posterior.
pub fn backward_sample<R: Rng + ?Sized>(
    messages: &FilterMessages,
    transitions: &Transitions,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if messages.degenerate {
        return Err(MjpError::Precondition(
            "cannot backward-sample from a zero-likelihood forward pass".into(),
        ));
    }
    let n = messages.dim;
    let steps = messages.n_steps();
    let mut states = vec![0; steps];
    let mut next = sample_categorical(messages.filtered(steps - 1), rng);
    states[steps - 1] = next;
    let mut w = vec![0.0; n];
    for i in (0..steps - 1).rev() {
        let b = transitions.step(i);
        for (s, (ws, &f)) in w.iter_mut().zip(messages.filtered(i)).enumerate() {
            *ws = f * b.get(s, next);
        }
        next = sample_categorical(&w, rng);
        states[i] = next;
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    fn b2() -> SquareMatrix {
        SquareMatrix::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn brute_force_single_step() {
        let table = LikelihoodTable::from_rows(&[vec![-0.3, -1.7], vec![-2.0, -0.1]]);
        let pi0 = [0.4, 0.6];
        let b = b2();
        let msgs = forward_filter(&table, &Transitions::Constant(b.clone()), &pi0).unwrap();
        let mut total = 0.0;
        for (v0, p0) in pi0.iter().enumerate() {
            for v1 in 0..2 {
                total += p0 * table.row(0)[v0].exp() * b.get(v0, v1) * table.row(1)[v1].exp();
            }
        }
        assert!((msgs.log_marginal - total.ln()).abs() < 1e-12);
        let sum: f64 = msgs.log_normalizers.iter().sum();
        assert_eq!(sum, msgs.log_marginal);
    }

    #[test]
    fn uninformative_observations_keep_messages_uniform() {
        let c = -0.8;
        let table = LikelihoodTable::from_rows(&vec![vec![c, c, c]; 5]);
        let b = SquareMatrix::from_vec(3, vec![1.0 / 3.0; 9]).unwrap();
        let msgs = forward_filter(&table, &Transitions::Constant(b), &[1.0 / 3.0; 3]).unwrap();
        assert!((msgs.log_marginal - 5.0 * c).abs() < 1e-12);
        for i in 0..5 {
            for v in msgs.filtered(i) {
                assert!((v - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impossible_observations_are_flagged() {
        let table = LikelihoodTable::from_rows(&[vec![0.0, 0.0], vec![f64::NEG_INFINITY, f64::NEG_INFINITY]]);
        let msgs = forward_filter(&table, &Transitions::Constant(b2()), &[0.5, 0.5]).unwrap();
        assert!(msgs.degenerate);
        assert_eq!(msgs.log_marginal, f64::NEG_INFINITY);
        let mut rng = chain_rng(0, 0);
        assert!(backward_sample(&msgs, &Transitions::Constant(b2()), &mut rng).is_err());
    }

    #[test]
    fn identity_transitions_give_constant_paths() {
        let table = LikelihoodTable::from_rows(&vec![vec![-1.0, -1.2, -0.9]; 6]);
        let t = Transitions::Constant(SquareMatrix::identity(3));
        let msgs = forward_filter(&table, &t, &[0.2, 0.5, 0.3]).unwrap();
        let mut rng = chain_rng(1, 0);
        for _ in 0..100 {
            let v = backward_sample(&msgs, &t, &mut rng).unwrap();
            assert!(v.iter().all(|s| *s == v[0]));
        }
    }

    #[test]
    fn single_state_is_constant() {
        let table = LikelihoodTable::from_rows(&vec![vec![-0.5]; 4]);
        let t = Transitions::Constant(SquareMatrix::identity(1));
        let msgs = forward_filter(&table, &t, &[1.0]).unwrap();
        let mut rng = chain_rng(1, 0);
        assert_eq!(backward_sample(&msgs, &t, &mut rng).unwrap(), vec![0; 4]);
    }
}
