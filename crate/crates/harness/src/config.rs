//! JSON experiment configuration, schema version 1.

use std::path::{Path, PathBuf};

use mjp_core::models::{Family, GammaPrior, OmegaPolicy};
use mjp_core::samplers::{GibbsParamStep, Resampling};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelConfig,
    pub data: DataConfig,
    pub samplers: Vec<SamplerConfig>,
    pub n_iter: usize,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fraction of each chain discarded before computing diagnostics.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_chains: bool,
    #[serde(default)]
    pub plot_x: PlotAxis,
}

fn default_replicates() -> usize {
    1
}
fn default_burn_in() -> f64 {
    0.1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotAxis {
    #[default]
    ProposalScale,
    TEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    ExpDecay,
    ImmigrationCapacity,
    BirthDeath,
    Jc69,
    ImmigrationInhomogeneous,
    Mmpp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: FamilyName,
    #[serde(default)]
    pub dim: Option<usize>,
    /// Piece length of the inhomogeneous immigration arrival rate.
    #[serde(default)]
    pub period: Option<f64>,
    /// `(shape, rate)` per parameter; each family has its own defaults.
    #[serde(default)]
    pub prior: Option<Vec<[f64; 2]>>,
}

/// A single value or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// Data simulated from the model with θ drawn from the prior.
    Synthetic {
        t_end: OneOrMany,
        /// Explicit observation times; otherwise `n_obs` evenly spaced
        /// points strictly inside `(0, t_end)`.
        #[serde(default)]
        obs_times: Option<Vec<f64>>,
        #[serde(default = "default_n_obs")]
        n_obs: usize,
        #[serde(default = "default_sigma2")]
        sigma2: f64,
    },
    /// Newline-delimited positions rescaled onto `[0, target]`.
    EventFile {
        path: PathBuf,
        #[serde(default = "default_target")]
        target: f64,
    },
}

fn default_n_obs() -> usize {
    19
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_target() -> f64 {
    20.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Gibbs,
    NaiveMh,
    SymmetrizedMh,
    Pmmh,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gibbs => "gibbs",
            KernelKind::NaiveMh => "naive_mh",
            KernelKind::SymmetrizedMh => "symmetrized_mh",
            KernelKind::Pmmh => "pmmh",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub policy: OmegaKind,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaKind {
    Single,
    Additive,
    MaxOfMax,
}

impl OmegaConfig {
    pub fn policy(&self) -> OmegaPolicy {
        let kappa = self.kappa;
        match self.policy {
            OmegaKind::Single => OmegaPolicy::Single { kappa },
            OmegaKind::Additive => OmegaPolicy::Additive { kappa },
            OmegaKind::MaxOfMax => OmegaPolicy::MaxOfMax { kappa },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProposalConfig {
    /// Multiplicative random walk, one run per σ² (applied to every
    /// coordinate).
    Lognormal { sigma2: Vec<f64> },
    /// Gaussian random walk `N(θ, scale·Σ)`. Without an explicit `covariance`,
    /// Σ is estimated from a Gibbs pilot run on each dataset.
    Gaussian {
        scales: Vec<f64>,
        #[serde(default)]
        covariance: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_pilot")]
        pilot_iterations: usize,
    },
}

fn default_pilot() -> usize {
    500
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig::Lognormal { sigma2: vec![1.0] }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamStepConfig {
    #[default]
    Auto,
    Conjugate,
    Metropolis,
}

impl From<ParamStepConfig> for GibbsParamStep {
    fn from(p: ParamStepConfig) -> Self {
        match p {
            ParamStepConfig::Auto => GibbsParamStep::Auto,
            ParamStepConfig::Conjugate => GibbsParamStep::Conjugate,
            ParamStepConfig::Metropolis => GibbsParamStep::Metropolis,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResamplingConfig {
    #[default]
    Multinomial,
    Systematic,
}

impl From<ResamplingConfig> for Resampling {
    fn from(r: ResamplingConfig) -> Self {
        match r {
            ResamplingConfig::Multinomial => Resampling::Multinomial,
            ResamplingConfig::Systematic => Resampling::Systematic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kernel: KernelKind,
    /// Uniformization policies to sweep; defaults to single κ = 2, or
    /// additive κ = 1 for the symmetrized kernel. Ignored by PMMH.
    #[serde(default)]
    pub omega: Vec<OmegaConfig>,
    #[serde(default)]
    pub proposal: Option<ProposalConfig>,
    #[serde(default)]
    pub particles: Vec<usize>,
    #[serde(default)]
    pub resampling: ResamplingConfig,
    #[serde(default)]
    pub param_step: ParamStepConfig,
}

impl SamplerConfig {
    pub fn omegas(&self) -> Vec<OmegaPolicy> {
        if !self.omega.is_empty() {
            return self.omega.iter().map(OmegaConfig::policy).collect();
        }
        match self.kernel {
            KernelKind::SymmetrizedMh => vec![OmegaPolicy::Additive { kappa: 1.0 }],
            _ => vec![OmegaPolicy::Single { kappa: 2.0 }],
        }
    }

    pub fn particle_counts(&self) -> Vec<usize> {
        if self.particles.is_empty() {
            vec![10]
        } else {
            self.particles.clone()
        }
    }

    pub fn proposal(&self) -> ProposalConfig {
        self.proposal.clone().unwrap_or_default()
    }
}

impl ModelConfig {
    pub fn family(&self) -> Result<Family> {
        let need_dim = |default: usize| self.dim.unwrap_or(default);
        let fixed = |n: usize| match self.dim {
            Some(d) if d != n => Err(HarnessError::Config(format!(
                "{:?} has exactly {n} states, got dim = {d}",
                self.family
            ))),
            _ => Ok(()),
        };
        let family = match self.family {
            FamilyName::ExpDecay => Family::ExpDecay { dim: need_dim(3) },
            FamilyName::ImmigrationCapacity => Family::ImmigrationCapacity { dim: need_dim(3) },
            FamilyName::BirthDeath => Family::BirthDeath { dim: need_dim(3) },
            FamilyName::Jc69 => {
                fixed(4)?;
                Family::Jc69
            }
            FamilyName::ImmigrationInhomogeneous => Family::ImmigrationInhomogeneous {
                dim: need_dim(3),
                period: self.period.unwrap_or(5.0),
                // widened to the longest horizon in `resolve_family`
                horizon: 0.0,
            },
            FamilyName::Mmpp => {
                fixed(2)?;
                Family::Mmpp
            }
        };
        Ok(family)
    }

    /// Family with the inhomogeneous horizon set to `t_end`.
    pub fn resolve_family(&self, t_end: f64) -> Result<Family> {
        Ok(match self.family()? {
            Family::ImmigrationInhomogeneous { dim, period, .. } => {
                Family::ImmigrationInhomogeneous { dim, period, horizon: t_end }
            }
            other => other,
        })
    }

    pub fn priors(&self) -> Result<Vec<GammaPrior>> {
        let raw: Vec<[f64; 2]> = match &self.prior {
            Some(p) => p.clone(),
            None => match self.family {
                FamilyName::Jc69 => vec![[3.0, 2.0]],
                FamilyName::Mmpp => vec![[2.0, 2.0], [2.0, 3.0], [3.0, 2.0], [1.0, 2.0]],
                _ => vec![[3.0, 2.0], [5.0, 2.0]],
            },
        };
        raw.iter().map(|&[s, r]| GammaPrior::new(s, r).map_err(HarnessError::from)).collect()
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates `path`; a relative event-file path is resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let DataConfig::EventFile { path: events, .. } = &mut config.data {
            if events.is_relative() {
                if let Some(dir) = path.parent() {
                    *events = dir.join(&*events);
                }
            }
        }
        Ok(config)
    }

    pub fn t_ends(&self) -> Vec<f64> {
        match &self.data {
            DataConfig::Synthetic { t_end, .. } => t_end.values(),
            DataConfig::EventFile { target, .. } => vec![*target],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("experiment name {:?} must be non-empty without path separators", self.name));
        }
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1".into());
        }
        if self.n_replicates == 0 {
            return bad("n_replicates must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in {} must lie in [0, 1)", self.burn_in));
        }
        if self.samplers.is_empty() {
            return bad("at least one sampler is required".into());
        }
        let longest = self.t_ends().into_iter().fold(f64::MIN_POSITIVE, f64::max);
        let family = self.model.resolve_family(longest)?;
        family.validate()?;
        let priors = self.model.priors()?;
        if priors.len() != family.n_params() {
            return bad(format!("{} needs {} priors, got {}", family.name(), family.n_params(), priors.len()));
        }
        if let Some(p) = self.model.period {
            if !(p.is_finite() && p > 0.0) {
                return bad(format!("period {p} must be positive"));
            }
        }
        let events = match &self.data {
            DataConfig::Synthetic { t_end, obs_times, sigma2, .. } => {
                if !(sigma2.is_finite() && *sigma2 > 0.0) {
                    return bad(format!("observation variance sigma2 = {sigma2} must be positive"));
                }
                let t_ends = t_end.values();
                if t_ends.is_empty() || t_ends.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                    return bad(format!("t_end {t_ends:?} must be positive"));
                }
                if let Some(times) = obs_times {
                    let horizon = t_ends.iter().copied().fold(f64::INFINITY, f64::min);
                    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= horizon)) {
                        return bad(format!("observation times must lie in [0, {horizon}]"));
                    }
                    if times.windows(2).any(|w| w[0] > w[1]) {
                        return bad("observation times must be sorted".into());
                    }
                }
                family.name() == "mmpp_two_state"
            }
            DataConfig::EventFile { target, .. } => {
                if !(target.is_finite() && *target > 0.0) {
                    return bad(format!("rescale target {target} must be positive"));
                }
                if family.name() != "mmpp_two_state" {
                    return bad("event files require the mmpp family".into());
                }
                true
            }
        };
        for s in &self.samplers {
            for omega in s.omegas() {
                omega.validate()?;
            }
            match s.proposal() {
                ProposalConfig::Lognormal { sigma2 } => {
                    if sigma2.is_empty() || sigma2.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return bad(format!("proposal sigma2 {sigma2:?} must be non-empty and positive"));
                    }
                }
                ProposalConfig::Gaussian { scales, covariance, pilot_iterations } => {
                    if scales.is_empty() || scales.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return bad(format!("proposal scales {scales:?} must be non-empty and positive"));
                    }
                    let n = family.n_params();
                    match covariance {
                        Some(c) if c.len() != n || c.iter().any(|r| r.len() != n) => {
                            return bad(format!("covariance must be {n}×{n}"));
                        }
                        None if pilot_iterations < 10 => {
                            return bad("pilot_iterations must be at least 10".into());
                        }
                        _ => {}
                    }
                }
            }
            if s.kernel == KernelKind::Pmmh {
                if events {
                    return bad("pmmh supports Gaussian point observations only".into());
                }
                if s.particle_counts().contains(&0) {
                    return bad("particle counts must be positive".into());
                }
            }
            if s.kernel == KernelKind::Gibbs
                && s.param_step == ParamStepConfig::Conjugate
                && !matches!(family.name(), "immigration_capacity" | "jc69" | "mmpp_two_state")
            {
                return bad(format!("{} has no conjugate parameter update", family.name()));
            }
        }
        Ok(())
    }
}
