use super::{build_rate_matrix, ModelParams, ModelSpec};
use crate::error::{MjpError, Result};
use crate::process::OMEGA_TOL;

/// How the uniformizing rate Ω is derived from the exit rates of the current
/// (and, for the symmetrized sampler, the proposed) parameters.
///
/// With `m(θ) = max_i A_i(θ)`:
///
/// | policy            | single `Ω(θ)` | pair `Ω(θ, ϑ)`              |
/// |-------------------|---------------|-----------------------------|
/// | `Single(κ)`       | `κ m(θ)`      | `κ m(θ) + κ m(ϑ)`           |
/// | `Additive(κ)`     | `2κ m(θ)`     | `κ (m(θ) + m(ϑ))`           |
/// | `MaxOfMax(κ)`     | `κ m(θ)`      | `κ max(m(θ), m(ϑ))`         |
///
/// The single form of each policy is its pair form evaluated at `ϑ = θ`,
/// except `Single`, whose pair form is the sum of two single rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OmegaPolicy {
    Single { kappa: f64 },
    Additive { kappa: f64 },
    MaxOfMax { kappa: f64 },
}

impl OmegaPolicy {
    pub fn kappa(&self) -> f64 {
        match *self {
            OmegaPolicy::Single { kappa }
            | OmegaPolicy::Additive { kappa }
            | OmegaPolicy::MaxOfMax { kappa } => kappa,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OmegaPolicy::Single { .. } => "single",
            OmegaPolicy::Additive { .. } => "additive",
            OmegaPolicy::MaxOfMax { .. } => "max_of_max",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            OmegaPolicy::Single { kappa } | OmegaPolicy::MaxOfMax { kappa } => kappa > 1.0,
            OmegaPolicy::Additive { kappa } => kappa >= 1.0,
        };
        let kappa = self.kappa();
        if ok && kappa.is_finite() {
            Ok(())
        } else {
            Err(MjpError::OmegaPolicy(format!("κ = {kappa} is not allowed for the {} policy", self.name())))
        }
    }

    pub fn single_from_max(&self, max_rate: f64) -> Result<f64> {
        let omega = match *self {
            OmegaPolicy::Single { kappa } | OmegaPolicy::MaxOfMax { kappa } => kappa * max_rate,
            OmegaPolicy::Additive { kappa } => 2.0 * kappa * max_rate,
        };
        dominates(omega, max_rate)
    }

    pub fn pair_from_max(&self, max_current: f64, max_proposed: f64) -> Result<f64> {
        let omega = match *self {
            OmegaPolicy::Single { kappa } | OmegaPolicy::Additive { kappa } => {
                kappa * (max_current + max_proposed)
            }
            OmegaPolicy::MaxOfMax { kappa } => kappa * max_current.max(max_proposed),
        };
        dominates(omega, max_current.max(max_proposed))
    }
}

/// Rounding can collapse `κ(m + m')` onto `m` when `m'` is negligible, so
/// equality is tolerated here; `check_omega` warns about it downstream.
fn dominates(omega: f64, max_rate: f64) -> Result<f64> {
    if omega.is_finite() && omega > 0.0 && omega > max_rate - OMEGA_TOL {
        Ok(omega)
    } else {
        Err(MjpError::OmegaPolicy(format!(
            "Ω = {omega} does not strictly exceed the largest exit rate {max_rate}"
        )))
    }
}

pub fn omega_single(spec: &ModelSpec, theta: &ModelParams) -> Result<f64> {
    let a = build_rate_matrix(spec, theta)?;
    spec.omega_policy.single_from_max(a.max_exit_rate())
}

pub fn omega_pair(spec: &ModelSpec, theta: &ModelParams, proposed: &ModelParams) -> Result<f64> {
    let a = build_rate_matrix(spec, theta)?;
    let b = build_rate_matrix(spec, proposed)?;
    spec.omega_policy.pair_from_max(a.max_exit_rate(), b.max_exit_rate())
}
