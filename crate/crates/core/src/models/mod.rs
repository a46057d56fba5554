//! Parametric MJP families, priors, proposals and uniformization policies.

mod conjugate;
mod omega;
mod prior;
mod proposal;

pub use conjugate::{
    conjugate_update_immigration, conjugate_update_jc69, conjugate_update_mmpp,
};
pub use omega::{omega_pair, omega_single, OmegaPolicy};
pub use prior::{log_prior, sample_prior, GammaPrior};
pub use proposal::ProposalKernel;

use std::fmt;

use crate::error::{MjpError, Result};
use crate::process::{generator_from_off_diagonal, RateMatrix, SquareMatrix};

/// Positive MJP parameters `θ`, ordered as in [`Family::param_names`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams(pub Vec<f64>);

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Self {
        ModelParams(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every coordinate finite and strictly positive.
    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|v| v.is_finite() && *v > 0.0)
    }
}

impl std::ops::Index<usize> for ModelParams {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// The structured rate-matrix families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Fully connected chain with `A_ij = α exp(-β / (i + j))`, states
    /// numbered from 1 inside the formula.
    ExpDecay { dim: usize },
    /// M/M/N/N queue: arrivals at rate α (blocked at the top state), state
    /// `i` drops to `i - 1` at rate `i β`.
    ImmigrationCapacity { dim: usize },
    /// Birth rate `i α`, death rate `i β`.
    BirthDeath { dim: usize },
    /// Jukes-Cantor nucleotide substitution: every off-diagonal rate is α.
    Jc69,
    /// Immigration with arrival rate `α ⌊t / period⌋`; the generator is
    /// materialised up to `horizon`.
    ImmigrationInhomogeneous { dim: usize, period: f64, horizon: f64 },
    /// Two-state switching process `0 -> 1` at rate α, `1 -> 0` at rate β,
    /// with per-state Poisson emission rates λ₁, λ₂.
    Mmpp,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::ExpDecay { .. } => "exp_decay",
            Family::ImmigrationCapacity { .. } => "immigration_capacity",
            Family::BirthDeath { .. } => "birth_death",
            Family::Jc69 => "jc69",
            Family::ImmigrationInhomogeneous { .. } => "immigration_inhomogeneous",
            Family::Mmpp => "mmpp_two_state",
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Family::ExpDecay { dim }
            | Family::ImmigrationCapacity { dim }
            | Family::BirthDeath { dim }
            | Family::ImmigrationInhomogeneous { dim, .. } => dim,
            Family::Jc69 => 4,
            Family::Mmpp => 2,
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Family::Jc69 => &["alpha"],
            Family::Mmpp => &["alpha", "beta", "lambda1", "lambda2"],
            _ => &["alpha", "beta"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim < 2 {
            return Err(MjpError::Config(format!("{} needs at least 2 states, got {dim}", self.name())));
        }
        if let Family::ImmigrationInhomogeneous { period, horizon, .. } = *self {
            if !(period > 0.0 && period.is_finite() && horizon > 0.0 && horizon.is_finite()) {
                return Err(MjpError::Config(
                    "inhomogeneous immigration needs positive period and horizon".into(),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Jc69 | Family::Mmpp => write!(f, "{}", self.name()),
            _ => write!(f, "{}_{}", self.name(), self.dim()),
        }
    }
}

/// A model family together with its prior, MH proposal and Ω policy.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub family: Family,
    pub prior: Vec<GammaPrior>,
    pub proposal: ProposalKernel,
    pub omega_policy: OmegaPolicy,
}

impl ModelSpec {
    pub fn new(
        family: Family,
        prior: Vec<GammaPrior>,
        proposal: ProposalKernel,
        omega_policy: OmegaPolicy,
    ) -> Result<Self> {
        family.validate()?;
        if prior.len() != family.n_params() {
            return Err(MjpError::Config(format!(
                "{} has {} parameters but {} priors were given",
                family.name(),
                family.n_params(),
                prior.len()
            )));
        }
        if proposal.dim() != family.n_params() {
            return Err(MjpError::Config(format!(
                "proposal acts on {} parameters, {} expects {}",
                proposal.dim(),
                family.name(),
                family.n_params()
            )));
        }
        omega_policy.validate()?;
        Ok(ModelSpec { family, prior, proposal, omega_policy })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        self.family.param_names()
    }

    /// Uniform distribution over states at time 0.
    pub fn initial_distribution(&self) -> Vec<f64> {
        let n = self.dim();
        vec![1.0 / n as f64; n]
    }

    /// Per-state Poisson emission rates carried in `θ` (MMPP only).
    pub fn emission_rates(&self, theta: &ModelParams) -> Option<Vec<f64>> {
        match self.family {
            Family::Mmpp => Some(vec![theta[2], theta[3]]),
            _ => None,
        }
    }

    /// Families whose parameters have closed-form Gamma full conditionals.
    pub fn has_conjugate_update(&self) -> bool {
        matches!(self.family, Family::ImmigrationCapacity { .. } | Family::Jc69 | Family::Mmpp)
    }

    pub fn with_proposal(&self, proposal: ProposalKernel) -> Result<Self> {
        Self::new(self.family.clone(), self.prior.clone(), proposal, self.omega_policy)
    }

    pub fn with_omega_policy(&self, omega_policy: OmegaPolicy) -> Result<Self> {
        Self::new(self.family.clone(), self.prior.clone(), self.proposal.clone(), omega_policy)
    }
}

/// `θ ↦ A(θ)` for the configured family.
pub fn build_rate_matrix(spec: &ModelSpec, theta: &ModelParams) -> Result<RateMatrix> {
    let family = &spec.family;
    if theta.len() != family.n_params() {
        return Err(MjpError::Config(format!(
            "{} takes {} parameters, got {}",
            family.name(),
            family.n_params(),
            theta.len()
        )));
    }
    if !theta.is_valid() {
        return Err(MjpError::Config(format!("parameters {:?} must be positive", theta.values())));
    }
    let dim = family.dim();
    let alpha = theta[0];
    match *family {
        Family::ExpDecay { .. } => RateMatrix::from_off_diagonal(dim, |i, j| {
            alpha * (-theta[1] / ((i + 1) + (j + 1)) as f64).exp()
        }),
        Family::ImmigrationCapacity { .. } => {
            RateMatrix::new(immigration_generator(dim, alpha, theta[1]))
        }
        Family::BirthDeath { .. } => RateMatrix::from_off_diagonal(dim, |i, j| {
            if j == i + 1 {
                i as f64 * alpha
            } else if j + 1 == i {
                i as f64 * theta[1]
            } else {
                0.0
            }
        }),
        Family::Jc69 => RateMatrix::from_off_diagonal(dim, |_, _| alpha),
        Family::ImmigrationInhomogeneous { period, horizon, .. } => {
            let n_segments = ((horizon / period).ceil() as usize).max(1);
            let breakpoints = (1..n_segments).map(|k| k as f64 * period).collect();
            let segments = (0..n_segments)
                .map(|k| immigration_generator(dim, alpha * k as f64, theta[1]))
                .collect();
            RateMatrix::piecewise(breakpoints, segments)
        }
        Family::Mmpp => RateMatrix::from_rows(&[vec![-alpha, alpha], vec![theta[1], -theta[1]]]),
    }
}

fn immigration_generator(dim: usize, arrival: f64, death: f64) -> SquareMatrix {
    generator_from_off_diagonal(dim, |i, j| {
        if j == i + 1 {
            arrival
        } else if j + 1 == i {
            i as f64 * death
        } else {
            0.0
        }
    })
}
