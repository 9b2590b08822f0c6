//! On-disk layout of a batch directory:
//!
//! ```text
//! report.json            BatchReport
//! finals.json            goals and final component poses per run
//! traces.csv             run,step,normalized_loss for every run
//! runs/seed_<s>.csv      full per-step trace of one run
//! runs/seed_<s>.jsonl    its event log, one record per line
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use assembly_core::{EventLog, LossTrace, Pose64, RunOutcome64, Scenario64};

use crate::batch::BatchReport;
use crate::plot::{write_plot_data, Curve};
use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalWorld {
    pub seed: u64,
    pub converged: bool,
    pub components: Vec<Pose64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finals {
    pub scenario: String,
    pub goals: Vec<Pose64>,
    pub runs: Vec<FinalWorld>,
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("runs").join(format!("seed_{seed}.csv"))
}

pub fn log_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("runs").join(format!("seed_{seed}.jsonl"))
}

/// Per-step trace with one loss column per component and one selection
/// column per hand (empty when idle).
pub fn write_trace(trace: &LossTrace<f64>, path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let (n, i) = trace
        .rows
        .first()
        .map(|r| (r.per_component_loss.len(), r.selected.len()))
        .unwrap_or((0, 0));
    let mut header = vec![
        "step".to_string(),
        "total_loss".into(),
        "normalized_total_loss".into(),
        "max_hand_constraint".into(),
    ];
    header.extend((0..n).map(|k| format!("loss_{k}")));
    header.extend((0..i).map(|k| format!("selected_{k}")));
    w.write_record(&header).map_err(|e| HarnessError::io(path, e))?;
    for r in &trace.rows {
        let mut rec = vec![
            r.step.to_string(),
            r.total_loss.to_string(),
            r.normalized_total_loss.to_string(),
            r.max_hand_constraint.to_string(),
        ];
        rec.extend(r.per_component_loss.iter().map(f64::to_string));
        rec.extend(r.selected.iter().map(|s| s.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn write_log(log: &EventLog, path: &Path) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in &log.records {
        serde_json::to_writer(&mut w, r).map_err(|e| HarnessError::io(path, e))?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<EventLog, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::io(path, e))?;
    Ok(EventLog { records })
}

/// Writes the trace and log of one run into `dir/runs/`.
pub fn write_run(dir: &Path, seed: u64, out: &RunOutcome64) -> Result<(), HarnessError> {
    let runs = dir.join("runs");
    fs::create_dir_all(&runs).map_err(|e| HarnessError::io(&runs, e))?;
    write_trace(&out.trace, &trace_path(dir, seed))?;
    write_log(&out.log, &log_path(dir, seed))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::io(path, e))
}

/// Serial aggregator for a finished batch.
pub fn write_batch(
    dir: &Path,
    scenario: &Scenario64,
    report: &BatchReport,
    outcomes: &[RunOutcome64],
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_json(report, &dir.join("report.json"))?;
    let finals = Finals {
        scenario: scenario.name.clone(),
        goals: scenario.components.iter().map(|c| c.goal).collect(),
        runs: report
            .per_run
            .iter()
            .zip(outcomes)
            .map(|(r, o)| FinalWorld {
                seed: r.seed,
                converged: r.converged,
                components: o.final_world.components.clone(),
            })
            .collect(),
    };
    write_json(&finals, &dir.join("finals.json"))?;
    let curves: Vec<Curve> = outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| Curve::from_trace(k, &o.trace))
        .collect();
    write_plot_data(&curves, &dir.join("traces.csv"))?;
    for (r, o) in report.per_run.iter().zip(outcomes) {
        write_run(dir, r.seed, o)?;
    }
    Ok(())
}

pub fn read_batch(dir: &Path) -> Result<(BatchReport, Finals), HarnessError> {
    Ok((read_json(&dir.join("report.json"))?, read_json(&dir.join("finals.json"))?))
}
