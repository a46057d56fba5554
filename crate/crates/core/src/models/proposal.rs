use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ModelParams;
use crate::error::{MjpError, Result};

/// Random-walk proposal `q(ϑ | θ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalKernel {
    /// `ϑ_i = θ_i exp(σ_i z_i)`, independent coordinates.
    LognormalRw { sigma2: Vec<f64> },
    /// `ϑ ~ N(θ, κ Σ)`; `chol` is the lower Cholesky factor of `κ Σ`.
    GaussianRw { cov: Vec<f64>, scale: f64, chol: Vec<f64>, dim: usize },
}

impl ProposalKernel {
    pub fn lognormal(sigma2: Vec<f64>) -> Result<Self> {
        if sigma2.is_empty() || sigma2.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(MjpError::Config(format!("lognormal variances {sigma2:?} must be positive")));
        }
        Ok(ProposalKernel::LognormalRw { sigma2 })
    }

    /// Gaussian random walk with covariance `scale * cov` (`cov` row-major).
    pub fn gaussian(cov: Vec<f64>, dim: usize, scale: f64) -> Result<Self> {
        if cov.len() != dim * dim || dim == 0 {
            return Err(MjpError::Config(format!(
                "covariance needs {} entries, got {}",
                dim * dim,
                cov.len()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(MjpError::Config(format!("covariance scale {scale} must be positive")));
        }
        let m = DMatrix::from_row_slice(dim, dim, &cov);
        if (&m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
            return Err(MjpError::Config("proposal covariance is not symmetric".into()));
        }
        let chol = (m * scale)
            .cholesky()
            .ok_or_else(|| MjpError::Config("proposal covariance is not positive definite".into()))?;
        let l = chol.l();
        let chol = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| l[(i, j)]).collect();
        Ok(ProposalKernel::GaussianRw { cov, scale, chol, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            ProposalKernel::LognormalRw { sigma2 } => sigma2.len(),
            ProposalKernel::GaussianRw { dim, .. } => *dim,
        }
    }

    /// Draws `ϑ ~ q(· | θ)`. Gaussian proposals may leave the positive
    /// orthant; callers reject those.
    pub fn propose<R: Rng + ?Sized>(&self, theta: &ModelParams, rng: &mut R) -> ModelParams {
        match self {
            ProposalKernel::LognormalRw { sigma2 } => ModelParams::new(
                theta
                    .values()
                    .iter()
                    .zip(sigma2)
                    .map(|(&x, s2)| x * (s2.sqrt() * rng.sample::<f64, _>(StandardNormal)).exp())
                    .collect(),
            ),
            ProposalKernel::GaussianRw { chol, dim, .. } => {
                let z: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                ModelParams::new(
                    (0..*dim)
                        .map(|i| theta[i] + (0..=i).map(|j| chol[i * dim + j] * z[j]).sum::<f64>())
                        .collect(),
                )
            }
        }
    }

    /// `log q(θ | ϑ) - log q(ϑ | θ)`.
    pub fn log_proposal_ratio(&self, theta: &ModelParams, proposed: &ModelParams) -> f64 {
        match self {
            ProposalKernel::LognormalRw { .. } => theta
                .values()
                .iter()
                .zip(proposed.values())
                .map(|(&x, &y)| (y / x).ln())
                .sum(),
            ProposalKernel::GaussianRw { .. } => 0.0,
        }
    }

    /// `log q(to | from)`, evaluated directly from the density.
    pub fn log_density(&self, from: &ModelParams, to: &ModelParams) -> f64 {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        match self {
            ProposalKernel::LognormalRw { sigma2 } => from
                .values()
                .iter()
                .zip(to.values())
                .zip(sigma2)
                .map(|((&x, &y), &s2)| {
                    if y <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    let d = y.ln() - x.ln();
                    -0.5 * (ln2pi + s2.ln()) - y.ln() - d * d / (2.0 * s2)
                })
                .sum(),
            ProposalKernel::GaussianRw { cov, scale, dim, .. } => {
                let m = DMatrix::from_row_slice(*dim, *dim, cov) * *scale;
                let d = DVector::from_iterator(*dim, (0..*dim).map(|i| to[i] - from[i]));
                let chol = m.cholesky().expect("validated covariance");
                let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let sol = chol.solve(&d);
                -0.5 * (*dim as f64 * ln2pi + logdet + d.dot(&sol))
            }
        }
    }
}
