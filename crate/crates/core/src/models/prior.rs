use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use super::{ModelParams, ModelSpec};
use crate::error::{MjpError, Result};

/// Gamma distribution in (shape, rate) form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
            return Err(MjpError::Config(format!(
                "Gamma(shape = {shape}, rate = {rate}) needs positive parameters"
            )));
        }
        Ok(GammaPrior { shape, rate })
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x.is_nan() || x <= 0.0 || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln()
            - self.rate * x
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated Gamma parameters")
            .sample(rng)
    }
}

/// Sum of independent Gamma log-densities; `-∞` outside the positive orthant.
pub fn log_prior(spec: &ModelSpec, theta: &ModelParams) -> f64 {
    if theta.len() != spec.prior.len() {
        return f64::NEG_INFINITY;
    }
    spec.prior.iter().zip(theta.values()).map(|(p, &x)| p.log_density(x)).sum()
}

pub fn sample_prior<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> ModelParams {
    ModelParams::new(spec.prior.iter().map(|p| p.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::spec_for;
    use crate::models::Family;
    use crate::rng::chain_rng;

    #[test]
    fn gamma_density_value() {
        let g = GammaPrior::new(3.0, 2.0).unwrap();
        assert!((g.log_density(1.0) - (4f64.ln() - 2.0)).abs() < 1e-12);
        assert_eq!(g.log_density(0.0), f64::NEG_INFINITY);
        assert_eq!(g.log_density(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn zero_coordinate_has_no_prior_mass() {
        let spec = spec_for(Family::ImmigrationCapacity { dim: 3 });
        assert_eq!(log_prior(&spec, &ModelParams::new(vec![1.0, 0.0])), f64::NEG_INFINITY);
        assert!(log_prior(&spec, &ModelParams::new(vec![1.0, 1.0])).is_finite());
    }

    #[test]
    fn prior_sampling_mean() {
        let spec = spec_for(Family::ImmigrationCapacity { dim: 3 });
        let mut rng = chain_rng(11, 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_prior(&spec, &mut rng)[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (0.75f64 / n as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se, "mean {mean}");
    }
}
