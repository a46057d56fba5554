use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mjp_core::diagnostics::{burn_in_start, mean_sd, EssReport};
use mjp_core::rng::chain_rng;
use mjp_core::samplers::{initial_state, ChainInit, ChainRecord};
use mjp_harness::config::DataConfig;
use mjp_harness::data::SyntheticDump;
use mjp_harness::error::{HarnessError, Result};
use mjp_harness::experiment::{build_cells, prepare_datasets, run_experiment, RunOptions};
use mjp_harness::output::{chain_header, chain_row, read_chain};
use mjp_harness::ExperimentConfig;

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "mjp", version, about = "Bayesian inference for Markov jump processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config burn-in fraction.
    #[arg(long)]
    burn_in: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(o) = &self.out {
            config.output_dir = o.clone();
        }
        if let Some(b) = self.burn_in {
            config.burn_in = b;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured synthetic datasets into `<out>/synthetic.json`.
    Simulate(Common),
    /// Run a single cell and stream its chain as CSV (stdout unless --out).
    Infer {
        #[command(flatten)]
        common: Common,
        /// Index of the cell in benchmark order.
        #[arg(long, default_value_t = 0)]
        cell: usize,
    },
    /// Run every cell and write results.csv, metadata.json, chains and plots.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// ESS summary of a chain dump.
    Ess {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        burn_in: f64,
    },
}

fn simulate(common: &Common) -> Result<()> {
    let config = common.load()?;
    if !matches!(config.data, DataConfig::Synthetic { .. }) {
        return Err(HarnessError::Config("simulate needs synthetic data".into()));
    }
    let datasets = prepare_datasets(&config)?;
    let spec_for = |t: f64| -> Result<_> {
        let family = config.model.resolve_family(t)?;
        let n = family.n_params();
        Ok(mjp_core::models::ModelSpec::new(
            family,
            config.model.priors()?,
            mjp_core::models::ProposalKernel::lognormal(vec![1.0; n])?,
            mjp_core::models::OmegaPolicy::Single { kappa: 2.0 },
        )?)
    };
    let specs = datasets.iter().map(|d| spec_for(d.t_end)).collect::<Result<Vec<_>>>()?;
    let dumps: Vec<_> = datasets
        .iter()
        .zip(&specs)
        .filter_map(|(d, spec)| d.truth.as_ref().map(|(theta, traj)| SyntheticDump::new(spec, theta, traj, &d.obs)))
        .collect();
    std::fs::create_dir_all(&config.output_dir).map_err(|e| HarnessError::io(&config.output_dir, e))?;
    let path = config.output_dir.join("synthetic.json");
    std::fs::write(&path, serde_json::to_string_pretty(&dumps)?).map_err(|e| HarnessError::io(&path, e))?;
    log::info!("wrote {} datasets to {}", dumps.len(), path.display());
    Ok(())
}

fn infer(common: &Common, cell_index: usize) -> Result<()> {
    let config = common.load()?;
    let datasets = prepare_datasets(&config)?;
    let cells = build_cells(&config, &datasets)?;
    let cell = cells
        .get(cell_index)
        .ok_or_else(|| HarnessError::Config(format!("cell {cell_index} out of range; config has {} cells", cells.len())))?;
    let data = &datasets[cell.dataset];
    log::info!("cell {cell_index}: {} {} t_end {} replicate {}", cell.sampler.name(), cell.setting, cell.t_end, cell.replicate);

    let sink: Box<dyn Write> = match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            let path = dir.join(format!("{}.csv", cell.file_stem(&config.name)));
            Box::new(std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(chain_header(cell.spec.param_names()))?;

    // Same random stream and start as a benchmark run of this cell.
    let mut rng = chain_rng(cell.seed, 0);
    data.obs.check_horizon(data.t_end)?;
    let mut state = initial_state(&ChainInit::Prior, &cell.spec, data.t_end, &mut rng)?;
    for iteration in 0..config.n_iter {
        let start = Instant::now();
        let info = cell.kernel.step(&mut state, &cell.spec, &data.obs, &mut rng)?;
        let record = ChainRecord {
            iteration,
            theta: state.theta.values().to_vec(),
            n_transitions: state.traj.n_transitions(),
            accepted: info.accepted,
            log_marginal: info.log_marginal,
            step_seconds: start.elapsed().as_secs_f64(),
        };
        w.write_record(chain_row(&record))?;
        w.flush().map_err(|e| HarnessError::io("<chain output>", e))?;
    }
    Ok(())
}

fn benchmark(common: &Common, threads: Option<usize>) -> Result<usize> {
    let config = common.load()?;
    let out = run_experiment(&config, &RunOptions { threads, write_outputs: true })?;
    if let Some(dir) = &out.output_dir {
        log::info!("{} rows, {} failed, written to {}", out.rows.len(), out.failures, dir.display());
    }
    Ok(out.failures)
}

fn ess(chain: &std::path::Path, burn_in: f64) -> Result<()> {
    let dump = read_chain(chain)?;
    let kept = &dump.records[burn_in_start(dump.records.len(), burn_in)?..];
    let report = EssReport::from_records(kept, 0.0)?;
    let acceptance = kept.iter().filter(|r| r.accepted).count() as f64 / kept.len() as f64;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["parameter", "ess", "wall_seconds", "ess_per_sec", "acceptance_rate", "posterior_mean", "posterior_sd"])?;
    for (j, name) in dump.names.iter().enumerate() {
        let trace: Vec<f64> = kept.iter().map(|r| r.theta[j]).collect();
        let (m, sd) = mean_sd(&trace);
        w.write_record([
            name.clone(),
            report.ess[j].to_string(),
            report.wall_seconds.to_string(),
            report.ess_per_sec[j].to_string(),
            acceptance.to_string(),
            m.to_string(),
            sd.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io("<stdout>", e))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c).map(|_| 0),
        Command::Infer { common, cell } => infer(common, *cell).map(|_| 0),
        Command::Benchmark { common, threads } => benchmark(common, *threads),
        Command::Ess { chain, burn_in } => ess(chain, *burn_in).map(|_| 0),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            log::error!("{failed} result rows failed");
            ExitCode::from(EXIT_PARTIAL)
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_OTHER })
        }
    }
}
