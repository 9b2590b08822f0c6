use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use assembly_core::{run, EventKind, PlannerConfig64, RunOutcome64, Scenario64};

use crate::HarnessError;

/// Min / median / max of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Spread {
            min: v[0],
            median,
            max: v[n - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub converged: bool,
    pub all_at_goal: bool,
    pub steps: u64,
    pub final_normalized_loss: f64,
    pub goal_reached: usize,
    pub handovers: usize,
}

impl RunSummary {
    pub fn of(seed: u64, out: &RunOutcome64) -> Self {
        RunSummary {
            seed,
            converged: out.converged,
            all_at_goal: out.all_at_goal,
            steps: out.steps(),
            final_normalized_loss: out.trace.final_normalized_loss(),
            goal_reached: out.log.count(EventKind::GoalReached),
            handovers: out.log.count(EventKind::Handover),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub scenario: String,
    pub base_seed: u64,
    pub runs: usize,
    pub converged: usize,
    /// Steps taken by converged runs.
    pub steps_to_convergence: Option<Spread>,
    pub final_normalized_loss: Option<Spread>,
    pub per_run: Vec<RunSummary>,
}

impl BatchReport {
    pub fn all_converged(&self) -> bool {
        self.converged == self.runs
    }
}

/// Runs seeds `base_seed..base_seed + n_runs` in parallel. Outcomes come back
/// in seed order regardless of scheduling.
pub fn run_batch(
    scenario: &Scenario64,
    n_runs: usize,
    base_seed: u64,
    cfg: &PlannerConfig64,
) -> Result<(BatchReport, Vec<RunOutcome64>), HarnessError> {
    if n_runs == 0 {
        return Err(HarnessError::Usage("n_runs must be >= 1".into()));
    }
    let outcomes = (0..n_runs as u64)
        .into_par_iter()
        .map(|k| run(scenario, base_seed + k, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let per_run: Vec<RunSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| RunSummary::of(base_seed + k as u64, o))
        .collect();
    let converged_steps: Vec<f64> = per_run.iter().filter(|r| r.converged).map(|r| r.steps as f64).collect();
    let finals: Vec<f64> = per_run.iter().map(|r| r.final_normalized_loss).collect();
    let report = BatchReport {
        scenario: scenario.name.clone(),
        base_seed,
        runs: n_runs,
        converged: converged_steps.len(),
        steps_to_convergence: Spread::of(&converged_steps),
        final_normalized_loss: Spread::of(&finals),
        per_run,
    };
    Ok((report, outcomes))
}
