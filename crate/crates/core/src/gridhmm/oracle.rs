//! Marginal likelihood by matrix exponentiation between observations.
//!
//! Cubic in the number of states and exact for homogeneous generators; used
//! to check the uniformized samplers, not for inference.

use nalgebra::{DMatrix, DVector};

use super::ObservationSet;
use crate::error::{MjpError, Result};
use crate::process::RateMatrix;

fn to_dmatrix(a: &RateMatrix) -> Result<DMatrix<f64>> {
    let m = a.homogeneous()?;
    Ok(DMatrix::from_row_slice(m.dim(), m.dim(), m.as_slice()))
}

/// `log P(X | A)` for a homogeneous generator.
pub fn exact_marginal_likelihood(
    a: &RateMatrix,
    pi0: &[f64],
    obs: &ObservationSet,
    t_end: f64,
    rates: Option<&[f64]>,
) -> Result<f64> {
    let gen = to_dmatrix(a)?;
    let n = gen.nrows();
    if pi0.len() != n {
        return Err(MjpError::Config("initial distribution does not match generator".into()));
    }
    obs.check_horizon(t_end)?;
    let mut alpha = DVector::from_column_slice(pi0).transpose();
    let mut log_scale = 0.0;
    let renorm = |alpha: &mut nalgebra::RowDVector<f64>, log_scale: &mut f64| {
        let z = alpha.sum();
        if z > 0.0 {
            *alpha /= z;
            *log_scale += z.ln();
            true
        } else {
            false
        }
    };
    match obs {
        ObservationSet::GaussianPoints(points) => {
            let mut t_prev = 0.0;
            for p in points {
                let dt = p.time - t_prev;
                if dt > 0.0 {
                    alpha = &alpha * (&gen * dt).exp();
                }
                for s in 0..n {
                    alpha[s] *= p.log_likelihood(s).exp();
                }
                if !renorm(&mut alpha, &mut log_scale) {
                    return Ok(f64::NEG_INFINITY);
                }
                t_prev = p.time;
            }
        }
        ObservationSet::PoissonEvents { times, rates: own } => {
            let rates = rates.unwrap_or(own);
            let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(rates));
            let drift = &gen - &lambda;
            let mut t_prev = 0.0;
            for &t in times {
                let dt = t - t_prev;
                if dt > 0.0 {
                    alpha = &alpha * (&drift * dt).exp();
                }
                alpha = &alpha * &lambda;
                if !renorm(&mut alpha, &mut log_scale) {
                    return Ok(f64::NEG_INFINITY);
                }
                t_prev = t;
            }
            let dt = t_end - t_prev;
            if dt > 0.0 {
                alpha = &alpha * (&drift * dt).exp();
            }
            if !renorm(&mut alpha, &mut log_scale) {
                return Ok(f64::NEG_INFINITY);
            }
        }
    }
    Ok(log_scale + alpha.sum().ln())
}
