//! Effective sample size and trace summaries.
//!
//! The ESS follows the autoregressive spectral estimator used by R's `coda`
//! package: fit AR(p) models by Yule-Walker for `p = 0..=p_max`, pick the
//! order with the smallest AIC, and read the spectral density at frequency
//! zero off the fitted model.

use crate::error::{MjpError, Result};
use crate::samplers::ChainRecord;

/// Details of one ESS computation.
#[derive(Clone, Debug, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    /// Selected autoregressive order.
    pub order: usize,
    /// Spectral density at frequency zero.
    pub spectrum0: f64,
    /// The chain never moved; `ess` is reported as 0.
    pub constant: bool,
}

pub const MIN_CHAIN_LEN: usize = 10;

/// Upper clip on the ESS relative to the chain length.
pub const ESS_OVERSHOOT: f64 = 1.05;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn ess_estimate(chain: &[f64]) -> Result<EssEstimate> {
    let n = chain.len();
    if n < MIN_CHAIN_LEN {
        return Err(MjpError::Precondition(format!(
            "ESS needs at least {MIN_CHAIN_LEN} samples, got {n}"
        )));
    }
    if chain.iter().any(|v| !v.is_finite()) {
        return Err(MjpError::Precondition("chain contains non-finite values".into()));
    }
    let m = mean(chain);
    let centered: Vec<f64> = chain.iter().map(|x| x - m).collect();
    let r0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let scale = chain.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    if r0 <= (1e-14 * scale).powi(2) {
        return Ok(EssEstimate { ess: 0.0, order: 0, spectrum0: 0.0, constant: true });
    }
    let max_order = ((10.0 * (n as f64).log10()).floor() as usize).min(n - 1);
    let acov: Vec<f64> = (0..=max_order)
        .map(|k| centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();

    // Levinson-Durbin recursion over increasing orders.
    let nf = n as f64;
    let mut phi: Vec<f64> = Vec::with_capacity(max_order);
    let mut var = r0;
    let mut best = (nf * r0.ln(), 0usize, Vec::new(), r0);
    for k in 1..=max_order {
        let acc = acov[k] - phi.iter().enumerate().map(|(j, p)| p * acov[k - 1 - j]).sum::<f64>();
        let reflection = acc / var;
        let prev = phi.clone();
        for j in 0..k - 1 {
            phi[j] = prev[j] - reflection * prev[k - 2 - j];
        }
        phi.push(reflection);
        var *= 1.0 - reflection * reflection;
        if var <= 0.0 {
            break;
        }
        let aic = nf * var.ln() + 2.0 * k as f64;
        if aic < best.0 {
            best = (aic, k, phi.clone(), var);
        }
    }
    let (_, order, coefs, innovation) = best;
    let var_pred = innovation * nf / (nf - (order as f64 + 1.0));
    let denom = 1.0 - coefs.iter().sum::<f64>();
    let spectrum0 = var_pred / (denom * denom);
    let sample_var = r0 * nf / (nf - 1.0);
    let ess = (nf * sample_var / spectrum0).clamp(0.0, ESS_OVERSHOOT * nf);
    Ok(EssEstimate { ess, order, spectrum0, constant: false })
}

/// ESS of a scalar chain; 0 for a constant chain.
pub fn effective_sample_size(chain: &[f64]) -> Result<f64> {
    ess_estimate(chain).map(|e| e.ess)
}

/// Per-parameter ESS and ESS per second of kernel time.
#[derive(Clone, Debug, PartialEq)]
pub struct EssReport {
    pub ess: Vec<f64>,
    pub wall_seconds: f64,
    pub ess_per_sec: Vec<f64>,
}

impl EssReport {
    /// Report over `records` after dropping the first `burn_in` fraction.
    /// Wall time covers the retained iterations only.
    pub fn from_records(records: &[ChainRecord], burn_in: f64) -> Result<Self> {
        let kept = &records[burn_in_start(records.len(), burn_in)?..];
        let n_params = kept.first().map_or(0, |r| r.theta.len());
        let ess = (0..n_params)
            .map(|p| {
                let trace: Vec<f64> = kept.iter().map(|r| r.theta[p]).collect();
                effective_sample_size(&trace)
            })
            .collect::<Result<Vec<_>>>()?;
        let wall_seconds: f64 = kept.iter().map(|r| r.step_seconds).sum();
        let ess_per_sec = ess
            .iter()
            .map(|e| if wall_seconds > 0.0 { e / wall_seconds } else { 0.0 })
            .collect();
        Ok(EssReport { ess, wall_seconds, ess_per_sec })
    }
}

/// Index of the first retained sample after discarding a `frac` burn-in.
pub fn burn_in_start(len: usize, frac: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&frac) {
        return Err(MjpError::Config(format!("burn-in fraction {frac} must lie in [0, 1)")));
    }
    Ok((len as f64 * frac).floor() as usize)
}

/// Number of MJP transitions per iteration.
pub fn transition_count_trace(records: &[ChainRecord]) -> Vec<usize> {
    records.iter().map(|r| r.n_transitions).collect()
}

/// Mean and standard deviation (n - 1 denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn ar1(rho: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = chain_rng(seed, 0);
        let mut x = 0.0;
        let sd = (1.0 - rho * rho).sqrt();
        (0..n)
            .map(|_| {
                x = rho * x + sd * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_chain() {
        let n = 10_000;
        let ess = effective_sample_size(&ar1(0.0, n, 1)).unwrap();
        assert!(ess >= 0.85 * n as f64 && ess <= 1.05 * n as f64, "{ess}");
    }

    #[test]
    fn ar1_half() {
        let n = 100_000;
        let ess = effective_sample_size(&ar1(0.5, n, 2)).unwrap();
        let want = n as f64 / 3.0;
        assert!((ess - want).abs() < 0.15 * want, "{ess}");
    }

    #[test]
    fn constant_chain() {
        let e = ess_estimate(&[2.5; 50]).unwrap();
        assert_eq!(e.ess, 0.0);
        assert!(e.constant);
        assert!(effective_sample_size(&[1.0; 5]).is_err());
    }

    #[test]
    fn affine_invariance() {
        let x = ar1(0.7, 5_000, 3);
        let y: Vec<f64> = x.iter().map(|v| -3.5 * v + 12.0).collect();
        let (a, b) = (effective_sample_size(&x).unwrap(), effective_sample_size(&y).unwrap());
        assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn thinning_does_not_increase_ess() {
        let reps = 100;
        let k = 5;
        let diffs: Vec<f64> = (0..reps)
            .map(|r| {
                let x = ar1(0.6, 5_000, 100 + r);
                let thin: Vec<f64> = x.iter().step_by(k).copied().collect();
                effective_sample_size(&thin).unwrap() - effective_sample_size(&x).unwrap()
            })
            .collect();
        let (m, sd) = mean_sd(&diffs);
        assert!(m <= 3.0 * sd / (reps as f64).sqrt(), "mean diff {m}");
    }

    #[test]
    fn trace_extraction() {
        let rec = |n| ChainRecord {
            iteration: 0,
            theta: vec![1.0],
            n_transitions: n,
            accepted: true,
            log_marginal: 0.0,
            step_seconds: 0.0,
        };
        assert!(transition_count_trace(&[]).is_empty());
        assert_eq!(transition_count_trace(&[rec(3), rec(4), rec(4)]), vec![3, 4, 4]);
    }
}
