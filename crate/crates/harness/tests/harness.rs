use std::path::PathBuf;

use mjp_core::gridhmm::ObservationSet;
use mjp_harness::config::{DataConfig, ExperimentConfig, PlotAxis};
use mjp_harness::data::{even_times, load_event_file, rescale_events};
use mjp_harness::experiment::{build_cells, prepare_datasets, run_experiment, ResultRow, RunOptions, RESULT_COLUMNS, TIMING_COLUMNS};
use mjp_harness::output::{read_chain, read_results};
use mjp_harness::plot::emit_plots;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn minimal(extra_samplers: &str) -> String {
    format!(
        r#"{{"schema_version": 1, "name": "mini",
            "model": {{"family": "immigration_capacity", "dim": 3}},
            "data": {{"type": "synthetic", "t_end": 20.0}},
            "samplers": [{extra_samplers}],
            "n_iter": 10}}"#
    )
}

fn write_events(dir: &std::path::Path, text: &str) -> PathBuf {
    let p = dir.join("events.txt");
    std::fs::write(&p, text).unwrap();
    p
}

fn event_times(obs: &ObservationSet) -> Vec<f64> {
    match obs {
        ObservationSet::PoissonEvents { times, .. } => times.clone(),
        _ => panic!("expected events"),
    }
}

#[test]
fn zero_noise_variance_is_rejected() {
    let text = minimal(r#"{"kernel": "gibbs"}"#).replace(r#""t_end": 20.0"#, r#""t_end": 20.0, "sigma2": 0.0"#);
    let err = ExperimentConfig::from_json(&text).and_then(|c| c.validate()).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn malformed_configs_are_config_errors() {
    for bad in [
        minimal(r#"{"kernel": "gibbs"}"#).replace(r#""schema_version": 1"#, r#""schema_version": 2"#),
        minimal(r#"{"kernel": "gibbs", "unknown_key": 1}"#),
        minimal(""),
        minimal(r#"{"kernel": "symmetrized_mh", "omega": [{"policy": "additive", "kappa": 0.5}]}"#),
        minimal(r#"{"kernel": "naive_mh", "omega": [{"policy": "single", "kappa": 0.9}]}"#),
        minimal(r#"{"kernel": "pmmh", "particles": [0]}"#),
        minimal(r#"{"kernel": "naive_mh", "proposal": {"type": "lognormal", "sigma2": [-1.0]}}"#),
        minimal(r#"{"kernel": "gibbs"}"#).replace(r#""n_iter": 10"#, r#""n_iter": 0"#),
    ] {
        let res = ExperimentConfig::from_json(&bad).and_then(|c| c.validate());
        assert!(res.as_ref().is_err_and(|e| e.is_config()), "accepted: {bad}");
    }
}

#[test]
fn event_loader_rescales_and_sorts() {
    let dir = tempfile::tempdir().unwrap();
    let obs = load_event_file(&write_events(dir.path(), "0\n100\n200\n"), 20.0).unwrap();
    assert_eq!(event_times(&obs), vec![0.0, 10.0, 20.0]);

    let obs = load_event_file(&write_events(dir.path(), "42\n"), 20.0).unwrap();
    assert_eq!(event_times(&obs), vec![0.0]);

    let obs = load_event_file(&write_events(dir.path(), "200\n0\n\n100\n"), 20.0).unwrap();
    assert_eq!(event_times(&obs), vec![0.0, 10.0, 20.0]);

    assert_eq!(rescale_events(vec![3.0, 1.0, 2.0], 4.0), vec![0.0, 2.0, 4.0]);
}

#[test]
fn event_loader_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_event_file(&write_events(dir.path(), "1\n2\nabc\n4\n"), 20.0).unwrap_err();
    assert!(err.is_config());
    assert!(err.to_string().contains("line 3"), "{err}");
    let err = load_event_file(&write_events(dir.path(), "1\n-5\n"), 20.0).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn default_synthetic_data_has_nineteen_readings() {
    let config = ExperimentConfig::from_json(&minimal(r#"{"kernel": "gibbs"}"#)).unwrap();
    let data = prepare_datasets(&config).unwrap();
    assert_eq!(data.len(), 1);
    match &data[0].obs {
        ObservationSet::GaussianPoints(points) => {
            assert_eq!(points.len(), 19);
            let times: Vec<f64> = points.iter().map(|p| p.time).collect();
            assert_eq!(times, even_times(20.0, 19));
            assert_eq!(times, (1..=19).map(f64::from).collect::<Vec<_>>());
        }
        _ => panic!("expected gaussian readings"),
    }
}

#[test]
fn ten_iterations_give_one_row_per_parameter() {
    let config = ExperimentConfig::from_json(&minimal(r#"{"kernel": "gibbs"}"#)).unwrap();
    let out = run_experiment(&config, &RunOptions::default()).unwrap();
    assert_eq!(out.rows.len(), 2);
    assert_eq!(out.failures, 0);
    assert!(out.rows.iter().all(|r| r.error.is_empty() && r.posterior_mean.is_some()));
}

#[test]
fn cells_expand_settings_and_replicates() {
    let text = minimal(
        r#"{"kernel": "gibbs"},
           {"kernel": "naive_mh", "proposal": {"type": "lognormal", "sigma2": [0.1, 1.0]}},
           {"kernel": "symmetrized_mh", "omega": [{"policy": "additive", "kappa": 1.0}, {"policy": "max_of_max", "kappa": 1.5}]},
           {"kernel": "pmmh", "particles": [5, 20]}"#,
    )
    .replace(r#""n_iter": 10"#, r#""n_iter": 10, "n_replicates": 3"#);
    let config = ExperimentConfig::from_json(&text).unwrap();
    let data = prepare_datasets(&config).unwrap();
    let cells = build_cells(&config, &data).unwrap();
    // conjugate gibbs 1, naive 2, symmetrized 2, pmmh 2, per replicate
    assert_eq!(cells.len(), 3 * 7);
    assert_eq!(cells.iter().filter(|c| c.replicate == 2).count(), 7);
    assert!(cells.iter().all(|c| c.seed == config.seed + c.replicate as u64));
    let settings: Vec<&str> = cells[..7].iter().map(|c| c.setting.as_str()).collect();
    assert_eq!(
        settings,
        ["single_k2", "single_k2,sigma2=0.1", "single_k2,sigma2=1", "additive_k1,sigma2=1", "max_of_max_k1.5,sigma2=1", "p5,sigma2=1", "p20,sigma2=1"]
    );
}

fn strip_timing(path: &std::path::Path) -> Vec<ResultRow> {
    read_results(path)
        .unwrap()
        .into_iter()
        .map(|mut r| {
            r.wall_seconds = None;
            r.ess_per_sec = None;
            r
        })
        .collect()
}

#[test]
fn same_seed_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let base = minimal(
        r#"{"kernel": "gibbs"}, {"kernel": "symmetrized_mh"}, {"kernel": "pmmh", "particles": [5]}"#,
    )
    .replace(r#""n_iter": 10"#, r#""n_iter": 40, "n_replicates": 2, "seed": 9"#);
    let mut runs = Vec::new();
    for (k, threads) in [1, 3].into_iter().enumerate() {
        let mut config = ExperimentConfig::from_json(&base).unwrap();
        config.output_dir = dir.path().join(format!("run{k}"));
        let out = run_experiment(&config, &RunOptions { threads: Some(threads), write_outputs: true }).unwrap();
        assert_eq!(out.failures, 0);
        runs.push(config.output_dir.join("results.csv"));
    }
    assert_eq!(strip_timing(&runs[0]), strip_timing(&runs[1]));

    let header = std::fs::read_to_string(&runs[0]).unwrap();
    assert_eq!(header.lines().next().unwrap(), RESULT_COLUMNS.join(","));
    assert!(TIMING_COLUMNS.iter().all(|c| RESULT_COLUMNS.contains(c)));

    let chains: Vec<_> = std::fs::read_dir(dir.path().join("run0/chains")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(chains.len(), 6);
    let dump = read_chain(&chains[0]).unwrap();
    assert_eq!(dump.names, ["alpha", "beta"]);
    assert_eq!(dump.records.len(), 40);
    assert!(dir.path().join("run0/metadata.json").exists());
}

#[test]
fn every_shipped_config_runs() {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    assert!(paths.len() >= 10);
    for path in paths {
        let mut config = ExperimentConfig::load(&path).unwrap();
        config.validate().unwrap();
        config.n_iter = 5;
        config.n_replicates = 1;
        if let DataConfig::Synthetic { t_end, .. } = &mut config.data {
            // keep the long-horizon sweep cheap
            *t_end = mjp_harness::config::OneOrMany::Many(t_end.values().into_iter().map(|t| t.min(20.0)).collect());
        }
        for s in &mut config.samplers {
            if let Some(mjp_harness::config::ProposalConfig::Gaussian { pilot_iterations, .. }) = &mut s.proposal {
                *pilot_iterations = 20;
            }
        }
        let out = run_experiment(&config, &RunOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(out.failures, 0, "{}", path.display());
        assert!(!out.rows.is_empty());
    }
}

fn row(series: &str, x: Option<f64>, v: f64, param: &str) -> ResultRow {
    ResultRow {
        experiment: "exp".into(),
        sampler: series.split(' ').next().unwrap().into(),
        setting: String::new(),
        series: series.into(),
        proposal_scale: x,
        t_end: 20.0,
        replicate: 0,
        seed: 0,
        parameter: param.into(),
        ess: Some(v),
        wall_seconds: Some(1.0),
        ess_per_sec: Some(v),
        acceptance_rate: Some(0.5),
        posterior_mean: Some(1.0),
        posterior_sd: Some(0.1),
        error: String::new(),
    }
}

#[test]
fn plots_have_one_polyline_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for p in ["alpha", "beta"] {
        for x in [0.1, 0.5, 1.0] {
            rows.push(row("naive_mh single_k2", Some(x), 10.0 * x, p));
            rows.push(row("symmetrized_mh additive_k1", Some(x), 30.0 * x, p));
        }
        rows.push(row("gibbs single_k2", None, 12.0, p));
    }
    let paths = emit_plots(&rows, dir.path(), PlotAxis::ProposalScale).unwrap();
    assert_eq!(paths.len(), 2);
    for path in &paths {
        let svg = std::fs::read_to_string(path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"class="series""#).count(), 3);
        assert_eq!(svg.matches(r#"class="marker""#).count(), 7);
        assert!(svg.contains("(log scale)"));
        assert!(!svg.contains("ESS / second (log scale)"));
    }

    let wide = vec![row("a x", Some(1.0), 1e-3, "alpha"), row("a x", Some(2.0), 50.0, "alpha")];
    let svg = std::fs::read_to_string(&emit_plots(&wide, &dir.path().join("wide"), PlotAxis::ProposalScale).unwrap()[0]).unwrap();
    assert!(svg.contains("ESS / second (log scale)"));

    let single = vec![row("a x", Some(1.0), 5.0, "alpha")];
    let svg = std::fs::read_to_string(&emit_plots(&single, &dir.path().join("one"), PlotAxis::ProposalScale).unwrap()[0]).unwrap();
    assert_eq!(svg.matches(r#"class="marker""#).count(), 1);
    assert!(!svg.contains("NaN"));
}

#[test]
fn chain_failures_become_error_rows() {
    use mjp_core::samplers::{GibbsParamStep, Kernel};
    use mjp_harness::experiment::run_cell;
    let text = minimal(r#"{"kernel": "gibbs", "param_step": "metropolis"}"#).replace("immigration_capacity", "exp_decay");
    let config = ExperimentConfig::from_json(&text).unwrap();
    let data = prepare_datasets(&config).unwrap();
    let mut cell = build_cells(&config, &data).unwrap().remove(0);
    // no conjugate update exists for this family
    cell.kernel = Kernel::Gibbs { param_step: GibbsParamStep::Conjugate };
    let rows = run_cell(&config, &cell, &data[0], None);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| !r.error.is_empty() && r.ess.is_none()));
}
