//! Network-free simulation session: the single writer behind the server.
//!
//! Commands are validated on submission and queued. [`Session::tick`] drains
//! the queue at the step boundary, then advances the world, so a snapshot
//! never shows a half-applied command.

use std::collections::VecDeque;

use assembly_core::{
    energy::GoalSpec, init_world, is_converged, DisturbanceAction, DisturbanceEvent, EventLog,
    Planner, PlannerConfig64, Scenario64, Simulator, WorldState64, Workcell64,
};

use crate::protocol::{Ack, Command, ComponentView, HandView, Param, Rejection, SimStatus, Snapshot};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Core(#[from] assembly_core::Error),
}

pub struct Session {
    scenario: Scenario64,
    cell: Workcell64,
    goals: GoalSpec<f64>,
    cfg: PlannerConfig64,
    world: WorldState64,
    log: EventLog,
    paused: bool,
    queue: VecDeque<Command>,
    pending_moves: Vec<DisturbanceEvent<f64>>,
    pending_steps: u64,
    peak_loss: f64,
}

impl Session {
    pub fn new(scenario: Scenario64, seed: u64) -> Result<Self, SessionError> {
        let world = init_world(&scenario, seed)?;
        let mut s = Session {
            cell: scenario.workcell(),
            goals: scenario.goals(),
            cfg: scenario.planner,
            scenario,
            world,
            log: EventLog::default(),
            paused: false,
            queue: VecDeque::new(),
            pending_moves: Vec::new(),
            pending_steps: 0,
            peak_loss: 0.0,
        };
        s.peak_loss = s.total_loss();
        Ok(s)
    }

    pub fn world(&self) -> &WorldState64 {
        &self.world
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn num_components(&self) -> usize {
        self.world.num_components()
    }

    /// Checks a command against the world without applying it.
    pub fn validate(&self, cmd: &Command) -> Result<(), Rejection> {
        validate_for(self.num_components(), cmd)
    }

    /// Validates and queues a command; the ack is final before anything is applied.
    pub fn submit(&mut self, seq: u64, cmd: Command) -> Ack {
        match self.validate(&cmd) {
            Ok(()) => {
                self.queue.push_back(cmd);
                Ack::accepted(seq)
            }
            Err(r) => Ack::rejected(Some(seq), &r),
        }
    }

    /// Queues an already validated command (the server validates on its I/O side).
    pub fn enqueue(&mut self, cmd: Command) {
        self.queue.push_back(cmd);
    }

    /// Applies queued commands, then advances: one step when running, or
    /// every requested single step when paused. Returns the steps taken.
    pub fn tick(&mut self) -> Result<u64, SessionError> {
        while let Some(cmd) = self.queue.pop_front() {
            self.apply(cmd)?;
        }
        let n = if self.paused {
            std::mem::take(&mut self.pending_steps)
        } else {
            self.pending_steps = 0;
            1
        };
        for _ in 0..n {
            self.step_once()?;
        }
        Ok(n)
    }

    fn apply(&mut self, cmd: Command) -> Result<(), SessionError> {
        match cmd {
            Command::MoveComponent { id, pose } => self.pending_moves.push(DisturbanceEvent {
                at_step: self.world.step,
                target: id,
                action: DisturbanceAction::SetPose(pose),
            }),
            Command::Pause => self.paused = true,
            Command::Resume => self.paused = false,
            // only meaningful while paused; a running session steps anyway
            Command::SingleStep if self.paused => self.pending_steps += 1,
            Command::SingleStep => {}
            Command::Reset { seed } => {
                self.world = init_world(&self.scenario, seed)?;
                self.log = EventLog::default();
                self.pending_moves.clear();
                self.pending_steps = 0;
                self.peak_loss = self.total_loss();
            }
            Command::SetParam { name: Param::TS, value } => self.cfg.t_s = value,
            Command::SetParam {
                name: Param::EpsilonG,
                value,
            } => self.goals.set_epsilon_g(value)?,
        }
        Ok(())
    }

    fn step_once(&mut self) -> Result<(), SessionError> {
        let planner = Planner::new(&self.cell, &self.goals, &self.cfg);
        let decisions = planner.plan_all(&self.world)?;
        let step = self.world.step;
        let due: Vec<_> = self
            .pending_moves
            .drain(..)
            .map(|e| DisturbanceEvent { at_step: step, ..e })
            .collect();
        let sim = Simulator::new(&self.cell, &self.goals, &self.cfg);
        self.world = sim.step_world(&self.world, &decisions, &due, &mut self.log)?;
        self.peak_loss = self.peak_loss.max(self.total_loss());
        Ok(())
    }

    pub fn total_loss(&self) -> f64 {
        (0..self.world.num_components())
            .map(|n| self.goals.loss(n, &self.world.components[n]))
            .sum()
    }

    pub fn status(&self) -> SimStatus {
        if self.paused {
            SimStatus::Paused
        } else if is_converged(&self.world, &self.goals) {
            SimStatus::Converged
        } else {
            SimStatus::Running
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let planner = Planner::new(&self.cell, &self.goals, &self.cfg);
        let eps = self.goals.epsilon_g();
        let hands = (0..self.world.num_hands())
            .map(|i| {
                let selected = self.world.selected[i];
                let energy = selected.map(|n| planner.energy_report(i, &self.world, &[]).per_component_energy[n]);
                HandView {
                    id: i,
                    pose: self.world.hands[i],
                    selected_subgoal: selected,
                    attached_component: self.world.held_by(i),
                    energy,
                }
            })
            .collect();
        let components = (0..self.world.num_components())
            .map(|n| {
                let goal_loss = self.goals.loss(n, &self.world.components[n]);
                ComponentView {
                    id: n,
                    pose: self.world.components[n],
                    goal_pose: *self.goals.target(n),
                    goal_loss,
                    at_goal: goal_loss <= eps,
                }
            })
            .collect();
        let total = self.total_loss();
        Snapshot {
            step: self.world.step,
            sim_status: self.status(),
            hands,
            components,
            workspaces: self.cell.workspaces.clone(),
            total_loss: total,
            normalized_loss: if self.peak_loss > 0.0 { total / self.peak_loss } else { 0.0 },
            log_len: self.log.len(),
        }
    }
}

/// World-dependent checks: component ids must exist.
pub fn validate_for(num_components: usize, cmd: &Command) -> Result<(), Rejection> {
    match cmd {
        Command::MoveComponent { id, .. } if *id >= num_components => Err(Rejection::Id(format!(
            "unknown component {id} ({num_components} components)"
        ))),
        _ => Ok(()),
    }
}
