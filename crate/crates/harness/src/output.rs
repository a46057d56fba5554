//! Results CSV, per-chain dumps and run metadata.

use std::path::Path;

use mjp_core::samplers::ChainRecord;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{ResultRow, RESULT_COLUMNS};

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Header of a chain dump: `iteration`, one column per parameter,
/// `n_transitions`, `accepted` (0/1), `step_seconds`.
pub fn chain_header(names: &[&str]) -> Vec<String> {
    let mut h = vec!["iteration".to_string()];
    h.extend(names.iter().map(|s| s.to_string()));
    h.extend(["n_transitions", "accepted", "step_seconds"].map(String::from));
    h
}

pub fn chain_row(r: &ChainRecord) -> Vec<String> {
    let mut row = vec![r.iteration.to_string()];
    row.extend(r.theta.iter().map(|v| v.to_string()));
    row.push(r.n_transitions.to_string());
    row.push(u8::from(r.accepted).to_string());
    row.push(r.step_seconds.to_string());
    row
}

pub fn write_chain(path: &Path, names: &[&str], records: &[ChainRecord]) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(chain_header(names))?;
    for r in records {
        w.write_record(chain_row(r))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Chain dump read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainDump {
    pub names: Vec<String>,
    pub records: Vec<ChainRecord>,
}

pub fn read_chain(path: &Path) -> Result<ChainDump> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let n = header.len();
    let bad = |line: usize, message: String| HarnessError::Ingest { path: path.to_path_buf(), line, message };
    if n < 5 || &header[0] != "iteration" || &header[n - 3] != "n_transitions" {
        return Err(bad(1, "not a chain dump header".into()));
    }
    let names: Vec<String> = header.iter().skip(1).take(n - 4).map(String::from).collect();
    let mut records = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line, format!("bad value in column {}", k + 1)))
        };
        records.push(ChainRecord {
            iteration: num(0)? as usize,
            theta: (1..n - 3).map(num).collect::<Result<_>>()?,
            n_transitions: num(n - 3)? as usize,
            accepted: num(n - 2)? != 0.0,
            log_marginal: f64::NAN,
            step_seconds: num(n - 1)?,
        });
    }
    Ok(ChainDump { names, records })
}

pub fn write_metadata(path: &Path, config: &ExperimentConfig, n_cells: usize, failures: usize, threads: usize) -> Result<()> {
    ensure_parent(path)?;
    let meta = json!({
        "experiment": config.name,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "n_cells": n_cells,
        "failed_rows": failures,
        "threads": threads,
        "columns": RESULT_COLUMNS,
        "config": config,
    });
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
