//! Per-hand sub-goal selection and the gradient step.
//!
//! Every hand plans from the same immutable [`WorldState`] and never reads
//! another hand's decision. Each component a hand may still work on carries
//! an energy; the hand picks the smallest and descends it. A component whose
//! goal lies outside the hand's workspace gets a target clamped to the
//! nearest reachable pose, which is how parts migrate between workspaces.

use serde::{Deserialize, Serialize};

use crate::barrier::{
    barrier_cost_and_gradient, equality_penalty, inequality_value, project_into, BarrierParams,
    EqualityConstraint,
};
use crate::energy::{
    goal_loss, hand_energy, hand_energy_gradient, in_contact, ContactParams, EnergyReport, GoalSpec,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se3::{embed, pullback_gradient, Pose, PoseDelta, RigidTransform, EMBEDDED_DIM};
use crate::world::{WorldState, Workcell};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arbitration {
    /// Fully decentralised: two hands may pick the same component.
    #[default]
    None,
    /// Post-pass: the lower-energy hand keeps a contested component and the
    /// other re-selects among the remaining ones.
    NextBest,
}

/// Step size, horizon and the parameters of every term in the hand objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig<T> {
    /// Multiplier on the gradient (the sampling time of the update).
    pub t_s: T,
    pub max_steps: u64,
    pub contact: ContactParams<T>,
    pub barrier: BarrierParams<T>,
    pub arbitration: Arbitration,
    /// Per-step translation cap, metres.
    pub max_linear_step: T,
    /// Per-step rotation cap, radians.
    pub max_angular_step: T,
    /// Clearance kept between a clamped target and the workspace boundary.
    pub target_slack: T,
    /// A component is reachable by a hand when it lies at least this deep
    /// inside the hand's workspace.
    pub reach_clearance: T,
    pub max_halvings: u32,
    /// Weight of the quadratic equality-constraint penalty.
    pub equality_weight: T,
}

impl<T: Real> Default for PlannerConfig<T> {
    fn default() -> Self {
        PlannerConfig {
            t_s: T::lit(100.0),
            max_steps: 6000,
            contact: ContactParams::default(),
            barrier: BarrierParams::default(),
            arbitration: Arbitration::None,
            max_linear_step: T::lit(0.01),
            max_angular_step: T::lit(0.05),
            target_slack: T::lit(0.035),
            reach_clearance: T::lit(0.03),
            max_halvings: 8,
            equality_weight: T::zero(),
        }
    }
}

impl<T: Real> PlannerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("t_s", self.t_s)?;
        pos("max_linear_step", self.max_linear_step)?;
        pos("max_angular_step", self.max_angular_step)?;
        pos("target_slack", self.target_slack)?;
        if self.max_steps < 1 {
            return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
        }
        if !(self.reach_clearance >= T::zero()) || !(self.equality_weight >= T::zero()) {
            return Err(Error::InvalidParameter(
                "reach_clearance and equality_weight must be >= 0".into(),
            ));
        }
        self.contact.validate()?;
        self.barrier.validate()
    }
}

/// What one hand does this step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandDecision<T> {
    pub hand: usize,
    /// World step the decision was computed from.
    pub planned_at: u64,
    pub selected: Option<usize>,
    pub velocity: PoseDelta<T>,
    pub report: EnergyReport<T>,
}

/// Index of the smallest energy among masked-in entries; ties go to the lowest index.
pub fn masked_argmin<T: Real>(energies: &[T], mask: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (n, (e, ok)) in energies.iter().zip(mask.iter()).enumerate() {
        if !*ok || e.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if !(*e < b) => {}
            _ => best = Some((n, *e)),
        }
    }
    best.map(|(n, _)| n)
}

/// True when every component is within `epsilon_g` of its goal (inclusive).
pub fn is_converged<T: Real>(world: &WorldState<T>, goals: &GoalSpec<T>) -> bool {
    world
        .components
        .iter()
        .enumerate()
        .all(|(n, c)| goals.loss(n, c) <= goals.epsilon_g())
}

pub struct Planner<'a, T: Real> {
    cell: &'a Workcell<T>,
    goals: &'a GoalSpec<T>,
    cfg: &'a PlannerConfig<T>,
    equality: Option<&'a dyn EqualityConstraint<T>>,
}

impl<'a, T: Real> Planner<'a, T> {
    pub fn new(cell: &'a Workcell<T>, goals: &'a GoalSpec<T>, cfg: &'a PlannerConfig<T>) -> Self {
        Planner {
            cell,
            goals,
            cfg,
            equality: None,
        }
    }

    pub fn with_equality(mut self, eq: &'a dyn EqualityConstraint<T>) -> Self {
        self.equality = Some(eq);
        self
    }

    pub fn config(&self) -> &PlannerConfig<T> {
        self.cfg
    }

    /// Target this hand drives component `n` towards: the true goal when the
    /// hand can reach it, otherwise the closest pose inside the hand's
    /// workspace (same orientation, clamped position).
    pub fn reachable_target(&self, hand: usize, n: usize) -> Pose<T> {
        reachable_target(self.cell, self.goals, self.cfg, hand, n)
    }

    /// Whether hand `hand` still has work to do on component `n`.
    pub fn is_workable(&self, hand: usize, world: &WorldState<T>, n: usize) -> bool {
        let c = &world.components[n];
        let ws = &self.cell.workspaces[hand];
        if inequality_value(c, ws) > -self.cfg.reach_clearance {
            return false;
        }
        let target = self.reachable_target(hand, n);
        if goal_loss(&embed(c), &embed(&target)) <= self.goals.epsilon_g() {
            return false;
        }
        // a clamped target only counts while the part is still further from
        // its true goal than this hand can bring it
        if target != *self.goals.target(n) && self.goals.loss(n, c) <= self.goals.loss(n, &target) {
            return false;
        }
        true
    }

    pub fn energy_report(&self, hand: usize, world: &WorldState<T>, excluded: &[usize]) -> EnergyReport<T> {
        let h = embed(&world.hands[hand]);
        let n_comp = world.num_components();
        let mut energies = Vec::with_capacity(n_comp);
        let mut mask = Vec::with_capacity(n_comp);
        for n in 0..n_comp {
            let c = embed(&world.components[n]);
            let t = embed(&self.reachable_target(hand, n));
            energies.push(hand_energy(&h, &c, &t, &self.cfg.contact));
            mask.push(!excluded.contains(&n) && self.is_workable(hand, world, n));
        }
        let selected = masked_argmin(&energies, &mask);
        let hand_gradient = match selected {
            Some(n) => {
                let c = embed(&world.components[n]);
                let t = embed(&self.reachable_target(hand, n));
                let g = hand_energy_gradient(&h, &c, &t, &self.cfg.contact);
                if in_contact(&h, &c, &self.cfg.contact) {
                    g.component
                } else {
                    g.hand
                }
            }
            None => [T::zero(); EMBEDDED_DIM],
        };
        EnergyReport {
            per_component_energy: energies,
            feasible_mask: mask,
            selected,
            hand_gradient,
        }
    }

    pub fn select_subgoal(&self, hand: usize, world: &WorldState<T>) -> Option<usize> {
        self.energy_report(hand, world, &[]).selected
    }

    pub fn plan_step(&self, hand: usize, world: &WorldState<T>) -> Result<HandDecision<T>> {
        self.plan_step_excluding(hand, world, &[])
    }

    /// Plans one step for `hand`, never selecting any component in `excluded`.
    pub fn plan_step_excluding(
        &self,
        hand: usize,
        world: &WorldState<T>,
        excluded: &[usize],
    ) -> Result<HandDecision<T>> {
        if hand >= world.num_hands() || hand >= self.cell.num_hands() {
            return Err(Error::InvalidParameter(format!("hand index {hand} out of range")));
        }
        let h = world.hands[hand];
        let ws = &self.cell.workspaces[hand];
        let f = inequality_value(&h, ws);
        if !(f < T::zero()) {
            return Err(Error::Infeasible(format!(
                "hand {hand} is not strictly inside its workspace (f = {f})"
            )));
        }
        let report = self.energy_report(hand, world, excluded);
        let velocity = match report.selected {
            None => self.retract(hand, &h),
            Some(n) => self.descend(hand, world, n)?,
        };
        Ok(HandDecision {
            hand,
            planned_at: world.step,
            selected: report.selected,
            velocity,
            report,
        })
    }

    /// Computes every hand's decision from the same snapshot.
    pub fn plan_all(&self, world: &WorldState<T>) -> Result<Vec<HandDecision<T>>> {
        let mut decisions = (0..world.num_hands())
            .map(|i| self.plan_step(i, world))
            .collect::<Result<Vec<_>>>()?;
        if self.cfg.arbitration == Arbitration::NextBest {
            self.arbitrate(world, &mut decisions)?;
        }
        Ok(decisions)
    }

    fn arbitrate(&self, world: &WorldState<T>, decisions: &mut [HandDecision<T>]) -> Result<()> {
        let energy_of = |d: &HandDecision<T>| d.selected.map(|n| d.report.per_component_energy[n]);
        let mut order: Vec<usize> = (0..decisions.len())
            .filter(|&i| decisions[i].selected.is_some())
            .collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (energy_of(&decisions[a]).unwrap(), energy_of(&decisions[b]).unwrap());
            ea.partial_cmp(&eb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mut taken: Vec<usize> = Vec::new();
        for i in order {
            if let Some(n) = decisions[i].selected {
                if taken.contains(&n) {
                    decisions[i] = self.plan_step_excluding(i, world, &taken)?;
                }
            }
            if let Some(n) = decisions[i].selected {
                taken.push(n);
            }
        }
        Ok(())
    }

    fn retract(&self, hand: usize, h: &Pose<T>) -> PoseDelta<T> {
        let home = &self.cell.homes[hand];
        h.delta_to(home)
            .scaled(self.cfg.t_s.min(T::one()))
            .clamped(self.cfg.max_linear_step, self.cfg.max_angular_step)
    }

    fn descend(&self, hand: usize, world: &WorldState<T>, n: usize) -> Result<PoseDelta<T>> {
        let cfg = self.cfg;
        let ws = &self.cell.workspaces[hand];
        let h = world.hands[hand];
        let c = world.components[n];
        let target = self.reachable_target(hand, n);
        let target_e = embed(&target);
        let (he, ce) = (embed(&h), embed(&c));
        let grad = hand_energy_gradient(&he, &ce, &target_e, &cfg.contact);
        let contact = in_contact(&he, &ce, &cfg.contact);

        let grasp = match world.attach[hand] {
            Some(g) if g.component == n => g.relative,
            _ => RigidTransform::relative(&h, &c),
        };

        let main = if contact {
            // move the part along its goal gradient and put the hand where the
            // frozen grasp says it has to be
            let dc = pullback_gradient(&c, &grad.component)
                .scaled(-cfg.t_s)
                .clamped(cfg.max_linear_step, cfg.max_angular_step);
            let c_next = c.advanced(&dc);
            h.delta_to(&grasp.parent_of(&c_next))
        } else {
            pullback_gradient(&h, &grad.hand).scaled(-cfg.t_s)
        };

        let (_, bgrad) = barrier_cost_and_gradient(&h, ws, &cfg.barrier)?;
        let mut step = main.plus(&PoseDelta {
            position: bgrad.map(|x| -cfg.t_s * x),
            angles: [T::zero(); 3],
        });
        if let Some(eq) = self.equality {
            let (r, rg) = eq.residual_and_gradient(&h);
            let w = -cfg.t_s * T::lit(2.0) * cfg.equality_weight * r;
            step = step.plus(&rg.scaled(w));
        }
        let step = step.clamped(cfg.max_linear_step, cfg.max_angular_step);
        if !step.is_finite() {
            return Ok(PoseDelta::zero());
        }

        let merit = |hp: &Pose<T>| -> Option<T> {
            let (b, _) = barrier_cost_and_gradient(hp, ws, &cfg.barrier).ok()?;
            let pen = match self.equality {
                Some(eq) => equality_penalty(eq.residual_and_gradient(hp).0, cfg.equality_weight),
                None => T::zero(),
            };
            let energy = if contact {
                goal_loss(&embed(&grasp.child_of(hp)), &target_e)
            } else {
                hand_energy(&embed(hp), &ce, &target_e, &cfg.contact)
            };
            Some(energy + b + pen)
        };

        let m0 = merit(&h).ok_or_else(|| Error::Infeasible(format!("hand {hand} merit undefined")))?;
        let mut alpha = T::one();
        let half = T::lit(0.5);
        for _ in 0..=cfg.max_halvings {
            let trial = step.scaled(alpha);
            if let Some(m) = merit(&h.advanced(&trial)) {
                if m <= m0 {
                    return Ok(trial);
                }
            }
            alpha = alpha * half;
        }
        Ok(PoseDelta::zero())
    }
}

/// Free-function form of [`Planner::reachable_target`] shared with the simulator.
pub fn reachable_target<T: Real>(
    cell: &Workcell<T>,
    goals: &GoalSpec<T>,
    cfg: &PlannerConfig<T>,
    hand: usize,
    n: usize,
) -> Pose<T> {
    let goal = goals.target(n);
    let ws = &cell.workspaces[hand];
    if inequality_value(goal, ws) <= -cfg.target_slack {
        *goal
    } else {
        project_into(goal, ws, cfg.target_slack).unwrap_or(*goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::WorkspaceSet;

    fn cell(n_hands: usize) -> Workcell<f64> {
        let left = WorkspaceSet::new_box([-0.6, -0.05, -0.2], [0.6, 0.6, 0.2]).unwrap();
        let right = WorkspaceSet::new_box([-0.6, -0.6, -0.2], [0.6, 0.05, 0.2]).unwrap();
        let homes = [
            Pose::planar(0.0, 0.35, 0.0).unwrap(),
            Pose::planar(0.0, -0.35, 0.0).unwrap(),
        ];
        Workcell {
            workspaces: vec![left, right][..n_hands].to_vec(),
            homes: homes[..n_hands].to_vec(),
        }
    }

    #[test]
    fn masked_argmin_examples() {
        assert_eq!(masked_argmin(&[0.5, 0.2, 0.0], &[true, true, false]), Some(1));
        assert_eq!(masked_argmin::<f64>(&[0.5, 0.2], &[false, false]), None);
        assert_eq!(masked_argmin(&[0.3, 0.3, 0.4], &[true, true, true]), Some(0));
        assert_eq!(masked_argmin(&[0.3, 0.1, 0.1], &[true, true, true]), Some(1));
    }

    #[test]
    fn converged_boundary_is_inclusive() {
        let goals = GoalSpec::new(vec![Pose::planar(0.0, 0.2, 0.0).unwrap()], 1e-4).unwrap();
        let hands = vec![Pose::planar(0.0, 0.35, 0.0).unwrap()];
        let mut w = WorldState::new(hands, vec![Pose::planar(0.0, 0.2, 0.0).unwrap()], 0);
        assert!(is_converged(&w, &goals));
        w.components[0] = Pose::planar(0.1, 0.2, 0.0).unwrap();
        assert!(!is_converged(&w, &goals));
        let c = Pose::planar(0.0, 0.2, 0.0).unwrap();
        let loss = goals.loss(0, &Pose::planar(0.0, 0.21, 0.0).unwrap());
        let goals = GoalSpec::new(vec![c], loss).unwrap();
        w.components[0] = Pose::planar(0.0, 0.21, 0.0).unwrap();
        assert!(is_converged(&w, &goals));
    }

    #[test]
    fn all_at_goal_means_idle() {
        let cell = cell(1);
        let goals = GoalSpec::new(vec![Pose::planar(0.1, 0.2, 0.0).unwrap()], 1e-4).unwrap();
        let cfg = PlannerConfig::default();
        let planner = Planner::new(&cell, &goals, &cfg);
        let w = WorldState::new(vec![cell.homes[0]], vec![*goals.target(0)], 0);
        let d = planner.plan_step(0, &w).unwrap();
        assert_eq!(d.selected, None);
        assert!(d.velocity.is_zero());
    }

    #[test]
    fn infeasible_hand_rejected() {
        let cell = cell(1);
        let goals = GoalSpec::new(vec![Pose::planar(0.1, 0.2, 0.0).unwrap()], 1e-4).unwrap();
        let cfg = PlannerConfig::default();
        let planner = Planner::new(&cell, &goals, &cfg);
        let w = WorldState::new(
            vec![Pose::planar(0.0, -0.3, 0.0).unwrap()],
            vec![Pose::planar(0.0, 0.3, 0.0).unwrap()],
            0,
        );
        assert!(matches!(planner.plan_step(0, &w), Err(Error::Infeasible(_))));
    }

    #[test]
    fn grasped_part_moves_down_goal_gradient() {
        let cell = cell(1);
        let goal = Pose::planar(0.0, 0.3, 0.0).unwrap();
        let goals = GoalSpec::new(vec![goal], 1e-4).unwrap();
        let cfg = PlannerConfig {
            t_s: 0.001,
            ..PlannerConfig::default()
        };
        let planner = Planner::new(&cell, &goals, &cfg);
        let c = Pose::planar(0.2, 0.3, 0.0).unwrap();
        let w = WorldState::new(vec![c], vec![c], 0);
        let d = planner.plan_step(0, &w).unwrap();
        assert_eq!(d.selected, Some(0));
        // -t_s * 2 (c - c*) on x
        assert!((d.velocity.position[0] + 0.001 * 2.0 * 0.2).abs() < 1e-12);
        assert!(d.velocity.position[1].abs() < 1e-12);
    }

    #[test]
    fn far_component_outside_reach_is_masked() {
        let cell = cell(2);
        let goals = GoalSpec::new(vec![Pose::planar(0.0, -0.3, 0.0).unwrap()], 1e-4).unwrap();
        let cfg = PlannerConfig::default();
        let planner = Planner::new(&cell, &goals, &cfg);
        let w = WorldState::new(
            cell.homes.clone(),
            vec![Pose::planar(0.2, -0.2, 1.0).unwrap()],
            0,
        );
        assert_eq!(planner.select_subgoal(0, &w), None);
        assert_eq!(planner.select_subgoal(1, &w), Some(0));
    }

    #[test]
    fn clamped_target_sits_inside_both_workspaces() {
        let cell = cell(2);
        let goals = GoalSpec::new(vec![Pose::planar(0.0, -0.3, 0.5).unwrap()], 1e-4).unwrap();
        let cfg = PlannerConfig::default();
        let t = reachable_target(&cell, &goals, &cfg, 0, 0);
        assert!((inequality_value(&t, &cell.workspaces[0]) + cfg.target_slack).abs() < 1e-12);
        assert!(inequality_value(&t, &cell.workspaces[1]) < -cfg.reach_clearance);
        assert_eq!(t.yaw(), 0.5);
        assert_eq!(reachable_target(&cell, &goals, &cfg, 1, 0), *goals.target(0));
    }

    #[test]
    fn next_best_splits_contested_component() {
        let cell = cell(2);
        let goals = GoalSpec::new(
            vec![Pose::planar(0.0, 0.0, 0.0).unwrap(), Pose::planar(-0.3, 0.5, 2.0).unwrap()],
            1e-4,
        )
        .unwrap();
        let cfg = PlannerConfig {
            arbitration: Arbitration::NextBest,
            ..PlannerConfig::default()
        };
        let planner = Planner::new(&cell, &goals, &cfg);
        // component 0 sits in the shared band, nearer the left hand; component 1
        // is reachable by the left hand only
        let mut w = WorldState::new(
            vec![Pose::planar(0.0, -0.01, 0.0).unwrap(), Pose::planar(0.0, -0.04, 0.0).unwrap()],
            vec![Pose::planar(0.1, 0.0, 0.3).unwrap(), Pose::planar(0.3, 0.3, 0.2).unwrap()],
            0,
        );
        w.hands[0] = Pose::planar(0.1, 0.01, 0.3).unwrap();
        let free = Planner::new(&cell, &goals, &PlannerConfig::default())
            .plan_all(&w)
            .unwrap();
        assert_eq!(free[0].selected, Some(0));
        assert_eq!(free[1].selected, Some(0));
        let d = planner.plan_all(&w).unwrap();
        let e0 = d[0].report.per_component_energy[0];
        let e1 = free[1].report.per_component_energy[0];
        assert!(e0 < e1);
        assert_eq!(d[0].selected, Some(0));
        assert_eq!(d[1].selected, None);
    }
}
