//! Plot data for the loss curves: one CSV with `run,step,normalized_loss`.
//! Floats are written in Rust's shortest round-trip form, so parsing the
//! file back yields the exact in-memory values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use assembly_core::LossTrace;

use crate::HarnessError;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Row {
    run: usize,
    step: u64,
    normalized_loss: f64,
}

/// Normalized-loss curve of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub run: usize,
    pub points: Vec<(u64, f64)>,
}

impl Curve {
    pub fn from_trace(run: usize, trace: &LossTrace<f64>) -> Self {
        Curve {
            run,
            points: trace.rows.iter().map(|r| (r.step, r.normalized_total_loss)).collect(),
        }
    }
}

pub fn write_plot_data(curves: &[Curve], path: &Path) -> Result<(), HarnessError> {
    if curves.is_empty() {
        return Err(HarnessError::Usage("no traces to write".into()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for c in curves {
        for &(step, normalized_loss) in &c.points {
            w.serialize(Row {
                run: c.run,
                step,
                normalized_loss,
            })
            .map_err(|e| HarnessError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

/// Parses a file written by [`write_plot_data`]; runs keep their file order.
pub fn read_plot_data(path: &Path) -> Result<Vec<Curve>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let mut curves: Vec<Curve> = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(|e| HarnessError::io(path, e))?;
        match curves.last_mut() {
            Some(c) if c.run == row.run => c.points.push((row.step, row.normalized_loss)),
            _ => curves.push(Curve {
                run: row.run,
                points: vec![(row.step, row.normalized_loss)],
            }),
        }
    }
    Ok(curves)
}
