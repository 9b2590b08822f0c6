//! Kinematic assembly world: free-flying hands, rigid grasps, scripted
//! disturbances and the experiment loop.
//!
//! One call to [`Simulator::step_world`] applies, in order: due disturbances,
//! sub-goal bookkeeping, releases of parts a hand stopped selecting, hand
//! integration, rigid transport of held parts, new grasps, releases at the
//! hand's target, workspace projection, goal-reached detection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier::{inequality_value, project_into};
use crate::energy::{goal_loss, in_contact, GoalSpec};
use crate::error::{Error, Result};
use crate::planner::{is_converged, reachable_target, HandDecision, Planner, PlannerConfig};
use crate::scalar::Real;
use crate::scenario::{Footprint, Scenario, SpawnRegion};
use crate::se3::{embed, Pose, PoseDelta, RigidTransform};
use crate::world::{Grasp, WorldState, Workcell};

/// A run counts as converged when its final normalized loss is below this.
pub const CONVERGENCE_THRESHOLD: f64 = 0.05;

/// Rejection-sampling budget per component.
pub const MAX_SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceAction<T: Real> {
    SetPose(Pose<T>),
    Offset(PoseDelta<T>),
}

/// Externally imposed change to one component at a given step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent<T: Real> {
    pub at_step: u64,
    pub target: usize,
    pub action: DisturbanceAction<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Attach,
    Detach,
    SubgoalChange,
    GoalReached,
    Disturbance,
    Handover,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub step: u64,
    pub kind: EventKind,
    pub hand: Option<usize>,
    pub component: Option<usize>,
}

/// Ordered record of everything that happened during a run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn push(&mut self, step: u64, kind: EventKind, hand: Option<usize>, component: Option<usize>) {
        self.records.push(EventRecord {
            step,
            kind,
            hand,
            component,
        });
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Samples a fresh world: components drawn in their spawn regions without
/// footprint overlap, hands at home.
pub fn init_world<T: Real>(scenario: &Scenario<T>, seed: u64) -> Result<WorldState<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Pose<T>> = Vec::with_capacity(scenario.num_components());
    for (n, spec) in scenario.components.iter().enumerate() {
        let region = &spec.spawn;
        if is_degenerate(region) {
            placed.push(sample_pose(region, &mut rng)?);
            continue;
        }
        let mut ok = None;
        for _ in 0..MAX_SPAWN_ATTEMPTS {
            let p = sample_pose(region, &mut rng)?;
            if placed.iter().all(|q| !footprints_overlap(&p, q, &scenario.footprint)) {
                ok = Some(p);
                break;
            }
        }
        match ok {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::Init(format!(
                    "could not place component {n} without overlap after {MAX_SPAWN_ATTEMPTS} attempts"
                )))
            }
        }
    }
    let hands = scenario.hands.iter().map(|h| h.home).collect();
    Ok(WorldState::new(hands, placed, seed))
}

fn is_degenerate<T: Real>(r: &SpawnRegion<T>) -> bool {
    (0..3).all(|k| r.min[k] == r.max[k]) && r.yaw[0] == r.yaw[1]
}

fn uniform<T: Real, R: Rng>(lo: T, hi: T, rng: &mut R) -> T {
    if lo == hi {
        return lo;
    }
    let u: f64 = rng.random();
    lo + (hi - lo) * T::lit(u)
}

/// Uniform pose in a spawn region (roll and pitch zero).
pub fn sample_pose<T: Real, R: Rng>(r: &SpawnRegion<T>, rng: &mut R) -> Result<Pose<T>> {
    let p = [0, 1, 2].map(|k| uniform(r.min[k], r.max[k], rng));
    let yaw = uniform(r.yaw[0], r.yaw[1], rng);
    Pose::new(p, [T::zero(), T::zero(), yaw])
}

/// Separating-axis test between two beam footprints in the table plane.
pub fn footprints_overlap<T: Real>(a: &Pose<T>, b: &Pose<T>, fp: &Footprint<T>) -> bool {
    let half = [fp.length / T::lit(2.0), fp.width / T::lit(2.0)];
    let axes = |p: &Pose<T>| {
        let (s, c) = p.yaw().sin_cos();
        [[c, s], [-s, c]]
    };
    let (aa, ba) = (axes(a), axes(b));
    let d = [b.position()[0] - a.position()[0], b.position()[1] - a.position()[1]];
    let dotv = |u: &[T; 2], v: &[T; 2]| u[0] * v[0] + u[1] * v[1];
    for axis in aa.iter().chain(ba.iter()) {
        let ra = half[0] * dotv(&aa[0], axis).abs() + half[1] * dotv(&aa[1], axis).abs();
        let rb = half[0] * dotv(&ba[0], axis).abs() + half[1] * dotv(&ba[1], axis).abs();
        if dotv(&d, axis).abs() >= ra + rb {
            return false;
        }
    }
    true
}

/// Applies decisions and disturbances to a world snapshot.
pub struct Simulator<'a, T: Real> {
    cell: &'a Workcell<T>,
    goals: &'a GoalSpec<T>,
    cfg: &'a PlannerConfig<T>,
}

impl<'a, T: Real> Simulator<'a, T> {
    pub fn new(cell: &'a Workcell<T>, goals: &'a GoalSpec<T>, cfg: &'a PlannerConfig<T>) -> Self {
        Simulator { cell, goals, cfg }
    }

    pub fn step_world(
        &self,
        world: &WorldState<T>,
        decisions: &[HandDecision<T>],
        events: &[DisturbanceEvent<T>],
        log: &mut EventLog,
    ) -> Result<WorldState<T>> {
        let step = world.step;
        let n_hands = world.num_hands();
        let mut by_hand: Vec<Option<&HandDecision<T>>> = vec![None; n_hands];
        for d in decisions {
            if d.planned_at != step {
                return Err(Error::Stale {
                    planned: d.planned_at,
                    world: step,
                });
            }
            if d.hand >= n_hands {
                return Err(Error::InvalidParameter(format!("decision for unknown hand {}", d.hand)));
            }
            by_hand[d.hand] = Some(d);
        }
        let mut next = world.clone();
        let eps_g = self.goals.epsilon_g();

        // 1. disturbances
        for ev in events {
            let n = ev.target;
            if n >= next.num_components() {
                return Err(Error::InvalidParameter(format!("disturbance targets unknown component {n}")));
            }
            if let Some(i) = next.holder_of(n) {
                next.attach[i] = None;
                log.push(step, EventKind::Detach, Some(i), Some(n));
            }
            next.components[n] = match ev.action {
                DisturbanceAction::SetPose(p) => p,
                DisturbanceAction::Offset(d) => next.components[n].advanced(&d),
            };
            next.released_by[n] = None;
            log.push(step, EventKind::Disturbance, None, Some(n));
        }

        // 2. sub-goal bookkeeping and 3. releases of parts no longer selected
        for (i, d) in by_hand.iter().enumerate() {
            let Some(d) = d else { continue };
            if d.selected != next.selected[i] {
                log.push(step, EventKind::SubgoalChange, Some(i), d.selected);
                next.selected[i] = d.selected;
            }
            if let Some(g) = next.attach[i] {
                if d.selected != Some(g.component) {
                    next.attach[i] = None;
                    next.released_by[g.component] = Some(i);
                    log.push(step, EventKind::Detach, Some(i), Some(g.component));
                }
            }
        }

        // 4. integrate hands, 5. carry held parts
        for (i, d) in by_hand.iter().enumerate() {
            if let Some(d) = d {
                next.hands[i] = next.hands[i].advanced(&d.velocity);
            }
            if let Some(g) = next.attach[i] {
                next.components[g.component] = g.relative.child_of(&next.hands[i]);
            }
        }

        // 6. new grasps on the selected part when in contact and not held elsewhere
        for (i, decision) in by_hand.iter().enumerate() {
            if next.attach[i].is_some() {
                continue;
            }
            let Some(n) = next.selected[i] else { continue };
            if decision.is_none() || next.holder_of(n).is_some() {
                continue;
            }
            let (h, c) = (next.hands[i], next.components[n]);
            if in_contact(&embed(&h), &embed(&c), &self.cfg.contact) {
                next.attach[i] = Some(Grasp {
                    component: n,
                    relative: RigidTransform::relative(&h, &c),
                });
                log.push(step, EventKind::Attach, Some(i), Some(n));
                if let Some(j) = next.released_by[n] {
                    if j != i {
                        log.push(step, EventKind::Handover, Some(i), Some(n));
                    }
                }
            }
        }

        // 7. release at the hand's target
        for i in 0..n_hands {
            let Some(g) = next.attach[i] else { continue };
            let n = g.component;
            let target = reachable_target(self.cell, self.goals, self.cfg, i, n);
            if goal_loss(&embed(&next.components[n]), &embed(&target)) <= eps_g {
                next.attach[i] = None;
                next.released_by[n] = Some(i);
                log.push(step, EventKind::Detach, Some(i), Some(n));
            }
        }

        // 8. keep hands inside their workspaces
        let slack = self.cfg.barrier.margin.max(T::lit(1e-3));
        for i in 0..n_hands {
            let ws = &self.cell.workspaces[i];
            if inequality_value(&next.hands[i], ws) >= T::zero() {
                next.hands[i] = project_into(&next.hands[i], ws, slack)?;
                if let Some(g) = next.attach[i] {
                    next.components[g.component] = g.relative.child_of(&next.hands[i]);
                }
            }
        }

        // 9. goal-reached transitions
        for n in 0..next.num_components() {
            let before = self.goals.loss(n, &world.components[n]);
            let after = self.goals.loss(n, &next.components[n]);
            if before > eps_g && after <= eps_g {
                let hand = next.holder_of(n).or(next.released_by[n]);
                log.push(step, EventKind::GoalReached, hand, Some(n));
            }
        }

        next.step = step + 1;
        Ok(next)
    }
}

/// One row of the loss trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow<T> {
    pub step: u64,
    pub total_loss: T,
    pub normalized_total_loss: T,
    pub per_component_loss: Vec<T>,
    pub selected: Vec<Option<usize>>,
    /// Largest hand `inequality_value` at this step (<= 0 means every hand is inside).
    pub max_hand_constraint: T,
}

/// Goal loss per step. `normalized` is false when the run never had any loss,
/// in which case the raw totals are kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTrace<T> {
    pub normalized: bool,
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Real> LossTrace<T> {
    pub fn final_normalized_loss(&self) -> T {
        self.rows.last().map(|r| r.normalized_total_loss).unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Divides totals by the largest total so the peak is 1.0.
    fn normalize(rows: Vec<TraceRow<T>>) -> Self {
        let peak = rows.iter().map(|r| r.total_loss).fold(T::zero(), T::max);
        let normalized = peak > T::zero();
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.normalized_total_loss = if normalized { r.total_loss / peak } else { r.total_loss };
                r
            })
            .collect();
        LossTrace { normalized, rows }
    }
}

fn trace_row<T: Real>(world: &WorldState<T>, goals: &GoalSpec<T>, cell: &Workcell<T>) -> TraceRow<T> {
    let per: Vec<T> = (0..world.num_components())
        .map(|n| goals.loss(n, &world.components[n]))
        .collect();
    let max_c = world
        .hands
        .iter()
        .zip(cell.workspaces.iter())
        .map(|(h, ws)| inequality_value(h, ws))
        .fold(T::neg_infinity(), T::max);
    TraceRow {
        step: world.step,
        total_loss: per.iter().copied().sum(),
        normalized_total_loss: T::zero(),
        per_component_loss: per,
        selected: world.selected.clone(),
        max_hand_constraint: max_c,
    }
}

/// Result of one simulated run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome<T: Real> {
    pub final_world: WorldState<T>,
    pub trace: LossTrace<T>,
    pub log: EventLog,
    /// Final normalized loss below [`CONVERGENCE_THRESHOLD`].
    pub converged: bool,
    /// Every component within `epsilon_g` of its goal at the end.
    pub all_at_goal: bool,
}

impl<T: Real> RunOutcome<T> {
    pub fn steps(&self) -> u64 {
        self.final_world.step
    }
}

/// Plans and steps until every part is at its goal (and no scripted event is
/// pending) or the horizon is exhausted.
pub fn run<T: Real>(scenario: &Scenario<T>, seed: u64, cfg: &PlannerConfig<T>) -> Result<RunOutcome<T>> {
    let world = init_world(scenario, seed)?;
    run_from(scenario, world, &scenario.events, cfg)
}

/// [`run`] from an explicit initial world and event script.
pub fn run_from<T: Real>(
    scenario: &Scenario<T>,
    mut world: WorldState<T>,
    events: &[DisturbanceEvent<T>],
    cfg: &PlannerConfig<T>,
) -> Result<RunOutcome<T>> {
    cfg.validate()?;
    let cell = scenario.workcell();
    let goals = scenario.goals();
    let planner = Planner::new(&cell, &goals, cfg);
    let sim = Simulator::new(&cell, &goals, cfg);
    let mut log = EventLog::default();
    let mut rows = vec![trace_row(&world, &goals, &cell)];
    while world.step < cfg.max_steps {
        let pending = events.iter().any(|e| e.at_step >= world.step);
        if !pending && is_converged(&world, &goals) {
            break;
        }
        let decisions = planner.plan_all(&world)?;
        let due: Vec<_> = events.iter().filter(|e| e.at_step == world.step).copied().collect();
        world = sim.step_world(&world, &decisions, &due, &mut log)?;
        rows.push(trace_row(&world, &goals, &cell));
    }
    let trace = LossTrace::normalize(rows);
    let converged = trace.final_normalized_loss() < T::lit(CONVERGENCE_THRESHOLD);
    let all_at_goal = is_converged(&world, &goals);
    Ok(RunOutcome {
        final_world: world,
        trace,
        log,
        converged,
        all_at_goal,
    })
}
