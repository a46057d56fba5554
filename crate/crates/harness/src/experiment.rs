//! Expansion of a config into (sampler, setting, replicate) cells and their
//! execution on a bounded worker pool.

use std::path::{Path, PathBuf};

use mjp_core::diagnostics::{burn_in_start, mean_sd, EssReport, MIN_CHAIN_LEN};
use mjp_core::models::{ModelSpec, OmegaPolicy, ProposalKernel};
use mjp_core::rng::chain_rng;
use mjp_core::samplers::{run_chain, run_chain_with, ChainInit, ChainRecord, GibbsParamStep, Kernel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DataConfig, ExperimentConfig, KernelKind, ParamStepConfig, ProposalConfig, SamplerConfig};
use crate::data::{even_times, generate_synthetic, load_event_file, Dataset};
use crate::error::{HarnessError, Result};
use crate::output;

/// Random stream of a replicate seed used for data simulation.
pub const DATA_STREAM: u64 = 1;
/// Random stream used by the Gibbs pilot that estimates proposal covariances.
pub const PILOT_STREAM: u64 = 2;
/// Fraction of the pilot run discarded before estimating the covariance.
pub const PILOT_BURN_IN: f64 = 0.2;

/// One row per (sampler, setting, t_end, replicate, parameter).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sampler: String,
    pub setting: String,
    pub series: String,
    pub proposal_scale: Option<f64>,
    pub t_end: f64,
    pub replicate: usize,
    pub seed: u64,
    pub parameter: String,
    pub ess: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub ess_per_sec: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub posterior_mean: Option<f64>,
    pub posterior_sd: Option<f64>,
    pub error: String,
}

/// Column order of the results CSV.
pub const RESULT_COLUMNS: [&str; 16] = [
    "experiment",
    "sampler",
    "setting",
    "series",
    "proposal_scale",
    "t_end",
    "replicate",
    "seed",
    "parameter",
    "ess",
    "wall_seconds",
    "ess_per_sec",
    "acceptance_rate",
    "posterior_mean",
    "posterior_sd",
    "error",
];

/// Columns that depend on wall-clock time.
pub const TIMING_COLUMNS: [&str; 2] = ["wall_seconds", "ess_per_sec"];

/// A fully resolved chain to run.
#[derive(Clone, Debug)]
pub struct Cell {
    pub sampler: KernelKind,
    pub kernel: Kernel,
    pub spec: ModelSpec,
    pub setting: String,
    /// Setting without the proposal scale; one plotted line per series.
    pub series: String,
    pub proposal_scale: Option<f64>,
    pub dataset: usize,
    pub t_end: f64,
    pub replicate: usize,
    pub seed: u64,
}

impl Cell {
    pub fn file_stem(&self, experiment: &str) -> String {
        let raw = format!("{experiment}__{}__{}__t{}__r{}", self.sampler.name(), self.setting, self.t_end, self.replicate);
        raw.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker count; `None` uses every core.
    pub threads: Option<usize>,
    /// Write results, chain dumps and plots under the config's output dir.
    pub write_outputs: bool,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub failures: usize,
    pub output_dir: Option<PathBuf>,
    pub plots: Vec<PathBuf>,
}

pub fn replicate_seed(config: &ExperimentConfig, replicate: usize) -> u64 {
    config.seed.wrapping_add(replicate as u64)
}

fn base_spec(config: &ExperimentConfig, t_end: f64) -> Result<ModelSpec> {
    let family = config.model.resolve_family(t_end)?;
    let n = family.n_params();
    Ok(ModelSpec::new(
        family,
        config.model.priors()?,
        ProposalKernel::lognormal(vec![1.0; n])?,
        OmegaPolicy::Single { kappa: 2.0 },
    )?)
}

/// Datasets in (t_end, replicate) order. An event file is loaded once and
/// shared by every replicate.
pub fn prepare_datasets(config: &ExperimentConfig) -> Result<Vec<Dataset>> {
    match &config.data {
        DataConfig::EventFile { path, target } => {
            let obs = load_event_file(path, *target)?;
            Ok(vec![Dataset { t_end: *target, obs, truth: None }])
        }
        DataConfig::Synthetic { t_end, obs_times, n_obs, sigma2 } => {
            let mut out = Vec::new();
            for t in t_end.values() {
                let spec = base_spec(config, t)?;
                let times = obs_times.clone().unwrap_or_else(|| even_times(t, *n_obs));
                for r in 0..config.n_replicates {
                    let mut rng = chain_rng(replicate_seed(config, r), DATA_STREAM);
                    let (theta, traj, obs) = generate_synthetic(&spec, t, &times, *sigma2, &mut rng)?;
                    out.push(Dataset { t_end: t, obs, truth: Some((theta, traj)) });
                }
            }
            Ok(out)
        }
    }
}

fn dataset_index(config: &ExperimentConfig, t_index: usize, replicate: usize) -> usize {
    match config.data {
        DataConfig::EventFile { .. } => 0,
        DataConfig::Synthetic { .. } => t_index * config.n_replicates + replicate,
    }
}

/// Sample covariance of θ from a conditional-update Gibbs run, row-major.
pub fn pilot_covariance(spec: &ModelSpec, dataset: &Dataset, iterations: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = chain_rng(seed, PILOT_STREAM);
    let kernel = Kernel::Gibbs { param_step: GibbsParamStep::Auto };
    let records = run_chain_with(&kernel, spec, &dataset.obs, dataset.t_end, iterations, &ChainInit::Prior, &mut rng)?;
    let kept = &records[burn_in_start(records.len(), PILOT_BURN_IN)?..];
    let n = spec.prior.len();
    let means: Vec<f64> = (0..n).map(|j| kept.iter().map(|r| r.theta[j]).sum::<f64>() / kept.len() as f64).collect();
    let mut cov = vec![0.0; n * n];
    for r in kept {
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] += (r.theta[i] - means[i]) * (r.theta[j] - means[j]);
            }
        }
    }
    let denom = (kept.len() - 1).max(1) as f64;
    cov.iter_mut().for_each(|c| *c /= denom);
    Ok(cov)
}

/// Gaussian proposal from `cov`, with diagonal jitter added until the
/// Cholesky factorisation succeeds.
fn gaussian_kernel(cov: &[f64], n: usize, scale: f64) -> Result<ProposalKernel> {
    let trace = (0..n).map(|i| cov[i * n + i]).sum::<f64>().abs().max(1e-12);
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut c = cov.to_vec();
        (0..n).for_each(|i| c[i * n + i] += jitter);
        if let Ok(k) = ProposalKernel::gaussian(c, n, scale) {
            return Ok(k);
        }
        jitter = if jitter == 0.0 { 1e-10 * trace } else { jitter * 10.0 };
    }
    Err(HarnessError::Config("pilot covariance is not positive definite".into()))
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn uses_conjugate(s: &SamplerConfig, spec: &ModelSpec) -> bool {
    s.kernel == KernelKind::Gibbs
        && match s.param_step {
            ParamStepConfig::Auto => spec.has_conjugate_update(),
            ParamStepConfig::Conjugate => true,
            ParamStepConfig::Metropolis => false,
        }
}

/// All cells in a fixed order: t_end, replicate, sampler, omega policy or
/// particle count, proposal scale.
pub fn build_cells(config: &ExperimentConfig, datasets: &[Dataset]) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for (ti, t_end) in config.t_ends().into_iter().enumerate() {
        let base = base_spec(config, t_end)?;
        let n = base.prior.len();
        for replicate in 0..config.n_replicates {
            let seed = replicate_seed(config, replicate);
            let dataset = dataset_index(config, ti, replicate);
            let mut pilot: Option<Vec<f64>> = None;
            for s in &config.samplers {
                let conjugate = uses_conjugate(s, &base);
                // (proposal kernel, scale label, scale)
                let proposals: Vec<(ProposalKernel, Option<String>, Option<f64>)> = if conjugate {
                    vec![(base.proposal.clone(), None, None)]
                } else {
                    match s.proposal() {
                        ProposalConfig::Lognormal { sigma2 } => sigma2
                            .iter()
                            .map(|&v| Ok((ProposalKernel::lognormal(vec![v; n])?, Some(format!("sigma2={}", fmt_num(v))), Some(v))))
                            .collect::<Result<_>>()?,
                        ProposalConfig::Gaussian { scales, covariance, pilot_iterations } => {
                            let cov = match covariance {
                                Some(rows) => rows.concat(),
                                None => match &pilot {
                                    Some(c) => c.clone(),
                                    None => {
                                        let c = pilot_covariance(&base, &datasets[dataset], pilot_iterations, seed)?;
                                        pilot = Some(c.clone());
                                        c
                                    }
                                },
                            };
                            scales
                                .iter()
                                .map(|&k| Ok((gaussian_kernel(&cov, n, k)?, Some(format!("scale={}", fmt_num(k))), Some(k))))
                                .collect::<Result<_>>()?
                        }
                    }
                };
                let variants: Vec<(Kernel, OmegaPolicy, String)> = match s.kernel {
                    KernelKind::Pmmh => s
                        .particle_counts()
                        .into_iter()
                        .map(|p| {
                            let kernel = Kernel::Pmmh { particles: p, resampling: s.resampling.into() };
                            (kernel, base.omega_policy, format!("p{p}"))
                        })
                        .collect(),
                    kind => s
                        .omegas()
                        .into_iter()
                        .map(|omega| {
                            let kernel = match kind {
                                KernelKind::Gibbs => Kernel::Gibbs { param_step: s.param_step.into() },
                                KernelKind::NaiveMh => Kernel::NaiveMh,
                                _ => Kernel::SymmetrizedMh,
                            };
                            (kernel, omega, format!("{}_k{}", omega.name(), fmt_num(omega.kappa())))
                        })
                        .collect(),
                };
                for (kernel, omega, label) in &variants {
                    for (proposal, scale_label, scale) in &proposals {
                        let spec = base.clone().with_proposal(proposal.clone())?.with_omega_policy(*omega)?;
                        let setting = match scale_label {
                            Some(sl) => format!("{label},{sl}"),
                            None => label.clone(),
                        };
                        cells.push(Cell {
                            sampler: s.kernel,
                            kernel: *kernel,
                            spec,
                            setting,
                            series: format!("{} {label}", s.kernel.name()),
                            proposal_scale: *scale,
                            dataset,
                            t_end,
                            replicate,
                            seed,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn row_template(config: &ExperimentConfig, cell: &Cell, parameter: &str) -> ResultRow {
    ResultRow {
        experiment: config.name.clone(),
        sampler: cell.sampler.name().to_string(),
        setting: cell.setting.clone(),
        series: cell.series.clone(),
        proposal_scale: cell.proposal_scale,
        t_end: cell.t_end,
        replicate: cell.replicate,
        seed: cell.seed,
        parameter: parameter.to_string(),
        ess: None,
        wall_seconds: None,
        ess_per_sec: None,
        acceptance_rate: None,
        posterior_mean: None,
        posterior_sd: None,
        error: String::new(),
    }
}

/// Summary rows for a finished chain.
pub fn summarize(config: &ExperimentConfig, cell: &Cell, records: &[ChainRecord]) -> Result<Vec<ResultRow>> {
    let kept = &records[burn_in_start(records.len(), config.burn_in)?..];
    let report = if kept.len() >= MIN_CHAIN_LEN { Some(EssReport::from_records(kept, 0.0)?) } else { None };
    let wall: f64 = kept.iter().map(|r| r.step_seconds).sum();
    let acceptance = if kept.is_empty() {
        None
    } else {
        Some(kept.iter().filter(|r| r.accepted).count() as f64 / kept.len() as f64)
    };
    Ok(cell
        .spec
        .param_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let trace: Vec<f64> = kept.iter().map(|r| r.theta[j]).collect();
            let (m, sd) = mean_sd(&trace);
            let mut row = row_template(config, cell, name);
            row.ess = report.as_ref().map(|r| r.ess[j]);
            row.ess_per_sec = report.as_ref().map(|r| r.ess_per_sec[j]);
            row.wall_seconds = Some(wall);
            row.acceptance_rate = acceptance;
            row.posterior_mean = (!trace.is_empty()).then_some(m);
            row.posterior_sd = (trace.len() > 1).then_some(sd);
            row
        })
        .collect())
}

fn failure_rows(config: &ExperimentConfig, cell: &Cell, err: &dyn std::fmt::Display) -> Vec<ResultRow> {
    cell.spec
        .param_names()
        .iter()
        .map(|name| {
            let mut row = row_template(config, cell, name);
            row.error = err.to_string();
            row
        })
        .collect()
}

/// Runs one cell; failures turn into rows carrying the error message.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell, dataset: &Dataset, chain_dir: Option<&Path>) -> Vec<ResultRow> {
    let outcome = run_chain(&cell.kernel, &cell.spec, &dataset.obs, dataset.t_end, config.n_iter, cell.seed, &ChainInit::Prior)
        .map_err(HarnessError::from)
        .and_then(|records| {
            if let Some(dir) = chain_dir {
                let path = dir.join(format!("{}.csv", cell.file_stem(&config.name)));
                output::write_chain(&path, cell.spec.param_names(), &records)?;
            }
            summarize(config, cell, &records)
        });
    outcome.unwrap_or_else(|e| {
        log::error!("{} {} replicate {}: {e}", cell.sampler.name(), cell.setting, cell.replicate);
        failure_rows(config, cell, &e)
    })
}

/// Runs every cell of `config`. Configuration problems abort before any
/// chain starts; chain failures are recorded per row.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = options.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;

    let datasets = prepare_datasets(config)?;
    let cells = pool.install(|| build_cells(config, &datasets))?;
    log::info!("{}: {} cells on {} threads", config.name, cells.len(), pool.current_num_threads());

    let out_dir = options.write_outputs.then(|| config.output_dir.clone());
    let chain_dir = match &out_dir {
        Some(dir) if config.write_chains => {
            let d = dir.join("chains");
            std::fs::create_dir_all(&d).map_err(|e| HarnessError::io(&d, e))?;
            Some(d)
        }
        _ => None,
    };
    let per_cell: Vec<Vec<ResultRow>> = pool.install(|| {
        cells.par_iter().map(|cell| run_cell(config, cell, &datasets[cell.dataset], chain_dir.as_deref())).collect()
    });
    let rows: Vec<ResultRow> = per_cell.into_iter().flatten().collect();
    let failures = rows.iter().filter(|r| !r.error.is_empty()).count();

    let mut plots = Vec::new();
    if let Some(dir) = &out_dir {
        output::write_results(&dir.join("results.csv"), &rows)?;
        output::write_metadata(&dir.join("metadata.json"), config, cells.len(), failures, pool.current_num_threads())?;
        plots = crate::plot::emit_plots(&rows, &dir.join("plots"), config.plot_x)?;
    }
    Ok(ExperimentOutput { rows, failures, output_dir: out_dir, plots })
}
