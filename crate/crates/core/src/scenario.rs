//! Scenario description and the `.scenario` file format (TOML).
//!
//! ```toml
//! name = "example"
//!
//! [footprint]            # optional, beam footprint used for spawn overlap tests
//! length = 0.3
//! width = 0.04
//!
//! [[hands]]
//! name = "left"
//! home = { p = [0.0, 0.35, 0.0], r = [0.0, 0.0, 0.0] }
//! workspace = { kind = "box", min = [-0.6, -0.05, -0.2], max = [0.6, 0.6, 0.2] }
//!
//! [[components]]
//! goal = { p = [0.0, 0.3, 0.0], r = [0.0, 0.0, 1.57] }
//! spawn = { min = [-0.4, 0.15, 0.0], max = [0.4, 0.5, 0.0], yaw = [-3.14, 3.14] }
//!
//! [planner]              # optional overrides; see PlannerConfig
//! t_s = 100.0
//! epsilon_g = 1e-4
//!
//! [[events]]             # optional scripted disturbances
//! at_step = 50
//! target = 0
//! set_pose = { p = [0.2, 0.3, 0.0] }      # or: offset = { p = [..], r = [..] }
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::barrier::{inequality_value, WorkspaceSet};
use crate::energy::GoalSpec;
use crate::error::{Error, Result};
use crate::planner::PlannerConfig;
use crate::scalar::Real;
use crate::se3::{Pose, PoseDelta};
use crate::sim::{DisturbanceAction, DisturbanceEvent};
use crate::world::Workcell;

/// Names of the scenarios shipped with the crate.
pub const BUNDLED: [&str; 4] = ["ramp8", "arrow4", "handover", "disassembly"];

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "ramp8" => Some(include_str!("../scenarios/ramp8.scenario")),
        "arrow4" => Some(include_str!("../scenarios/arrow4.scenario")),
        "handover" => Some(include_str!("../scenarios/handover.scenario")),
        "disassembly" => Some(include_str!("../scenarios/disassembly.scenario")),
        _ => None,
    }
}

/// Box region components spawn in; yaw drawn from `yaw[0]..=yaw[1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnRegion<T: Real> {
    pub min: [T; 3],
    pub max: [T; 3],
    #[serde(default = "zero2")]
    pub yaw: [T; 2],
}

fn zero2<T: Default + Copy>() -> [T; 2] {
    [T::default(); 2]
}

impl<T: Real> SpawnRegion<T> {
    pub fn at(p: &Pose<T>) -> Self {
        let pos = p.position();
        SpawnRegion {
            min: pos,
            max: pos,
            yaw: [p.yaw(); 2],
        }
    }

    fn validate(&self, idx: usize) -> Result<()> {
        if (0..3).any(|k| !(self.min[k] <= self.max[k])) || !(self.yaw[0] <= self.yaw[1]) {
            return Err(Error::Validation(format!(
                "components[{idx}].spawn: min must not exceed max"
            )));
        }
        Ok(())
    }
}

/// Rectangular footprint of a beam in the table plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Footprint<T> {
    pub length: T,
    pub width: T,
}

impl<T: Real> Default for Footprint<T> {
    fn default() -> Self {
        Footprint {
            length: T::lit(0.3),
            width: T::lit(0.04),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandSpec<T: Real> {
    #[serde(default)]
    pub name: String,
    pub home: Pose<T>,
    pub workspace: WorkspaceSet<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec<T: Real> {
    pub spawn: SpawnRegion<T>,
    pub goal: Pose<T>,
}

/// Axis-aligned table region, used to draw random disturbance destinations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRegion<T> {
    pub min: [T; 2],
    pub max: [T; 2],
}

/// Fully validated scenario with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T: Real> {
    pub name: String,
    pub hands: Vec<HandSpec<T>>,
    pub components: Vec<ComponentSpec<T>>,
    pub footprint: Footprint<T>,
    pub table: Option<TableRegion<T>>,
    pub planner: PlannerConfig<T>,
    pub epsilon_g: T,
    pub events: Vec<DisturbanceEvent<T>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile<T: Real> {
    name: String,
    num_hands: Option<usize>,
    hands: Vec<HandSpec<T>>,
    components: Vec<ComponentSpec<T>>,
    #[serde(default)]
    footprint: Footprint<T>,
    table: Option<TableRegion<T>>,
    #[serde(default)]
    planner: PlannerConfigFile<T>,
    #[serde(default)]
    events: Vec<EventFile<T>>,
}

/// Flat override table; every key is optional.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlannerConfigFile<T: Real> {
    epsilon_g: Option<T>,
    t_s: Option<T>,
    max_steps: Option<u64>,
    epsilon: Option<T>,
    sigma: Option<T>,
    mu: Option<T>,
    margin: Option<T>,
    arbitration: Option<crate::planner::Arbitration>,
    max_linear_step: Option<T>,
    max_angular_step: Option<T>,
    target_slack: Option<T>,
    reach_clearance: Option<T>,
    max_halvings: Option<u32>,
    equality_weight: Option<T>,
}

impl<T: Real> PlannerConfigFile<T> {
    fn apply(&self, mut c: PlannerConfig<T>) -> PlannerConfig<T> {
        macro_rules! set {
            ($($field:ident => $($path:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$($path).+ = v; })*
            };
        }
        set!(
            t_s => t_s,
            max_steps => max_steps,
            epsilon => contact.epsilon,
            sigma => contact.sigma,
            mu => barrier.mu,
            margin => barrier.margin,
            arbitration => arbitration,
            max_linear_step => max_linear_step,
            max_angular_step => max_angular_step,
            target_slack => target_slack,
            reach_clearance => reach_clearance,
            max_halvings => max_halvings,
            equality_weight => equality_weight,
        );
        c
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile<T: Real> {
    at_step: u64,
    target: usize,
    set_pose: Option<Pose<T>>,
    offset: Option<OffsetFile<T>>,
}

#[derive(Deserialize)]
struct OffsetFile<T: Real> {
    #[serde(default = "zero3")]
    p: [T; 3],
    #[serde(default = "zero3")]
    r: [T; 3],
}

fn zero3<T: Default + Copy>() -> [T; 3] {
    [T::default(); 3]
}

/// Default goal threshold: (0.01)² in embedded units.
pub fn default_epsilon_g<T: Real>() -> T {
    T::lit(1e-4)
}

impl<T: Real + DeserializeOwned> Scenario<T> {
    /// Parses and validates scenario text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScenarioFile<T> = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut events = Vec::with_capacity(file.events.len());
        for (i, ev) in file.events.into_iter().enumerate() {
            let action = match (ev.set_pose, ev.offset) {
                (Some(p), None) => DisturbanceAction::SetPose(p),
                (None, Some(o)) => DisturbanceAction::Offset(PoseDelta {
                    position: o.p,
                    angles: o.r,
                }),
                _ => {
                    return Err(Error::Validation(format!(
                        "events[{i}]: exactly one of `set_pose` or `offset` is required"
                    )))
                }
            };
            events.push(DisturbanceEvent {
                at_step: ev.at_step,
                target: ev.target,
                action,
            });
        }
        if let Some(n) = file.num_hands {
            if n != file.hands.len() {
                return Err(Error::Validation(format!(
                    "num_hands = {n} but {} [[hands]] entries given",
                    file.hands.len()
                )));
            }
        }
        let scenario = Scenario {
            name: file.name,
            hands: file.hands,
            components: file.components,
            footprint: file.footprint,
            table: file.table,
            planner: file.planner.apply(PlannerConfig::default()),
            epsilon_g: file.planner.epsilon_g.unwrap_or_else(default_epsilon_g),
            events,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Bundled scenario by name, or a file on disk.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(src) = bundled_source(name_or_path) {
            return Scenario::from_toml(src);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| Error::Io(format!("{name_or_path}: {e}")))?;
        Scenario::from_toml(&text)
    }
}

impl<T: Real> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        if self.hands.is_empty() {
            return Err(Error::Validation("at least one hand is required".into()));
        }
        if self.components.is_empty() {
            return Err(Error::Validation("at least one component is required".into()));
        }
        self.planner
            .validate()
            .map_err(|e| Error::Validation(format!("planner: {e}")))?;
        if !(self.epsilon_g > T::zero()) {
            return Err(Error::Validation("planner.epsilon_g must be > 0".into()));
        }
        if !(self.footprint.length > T::zero()) || !(self.footprint.width > T::zero()) {
            return Err(Error::Validation("footprint dimensions must be > 0".into()));
        }
        for (i, h) in self.hands.iter().enumerate() {
            if inequality_value(&h.home, &h.workspace) >= T::zero() {
                return Err(Error::Validation(format!(
                    "hands[{i}].home is not strictly inside its workspace"
                )));
            }
        }
        let slack = self.planner.target_slack;
        for (n, c) in self.components.iter().enumerate() {
            c.spawn.validate(n)?;
            let reachable = self
                .hands
                .iter()
                .any(|h| inequality_value(&c.goal, &h.workspace) <= -slack);
            if !reachable {
                return Err(Error::Validation(format!(
                    "components[{n}].goal {:?} lies outside every workspace",
                    c.goal.position()
                )));
            }
        }
        for (i, ev) in self.events.iter().enumerate() {
            if ev.target >= self.components.len() {
                return Err(Error::Validation(format!(
                    "events[{i}].target = {} but only {} components exist",
                    ev.target,
                    self.components.len()
                )));
            }
            if let DisturbanceAction::Offset(d) = &ev.action {
                if !d.is_finite() {
                    return Err(Error::Validation(format!("events[{i}].offset is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn num_hands(&self) -> usize {
        self.hands.len()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn workcell(&self) -> Workcell<T> {
        Workcell {
            workspaces: self.hands.iter().map(|h| h.workspace).collect(),
            homes: self.hands.iter().map(|h| h.home).collect(),
        }
    }

    pub fn goals(&self) -> GoalSpec<T> {
        GoalSpec::new(self.components.iter().map(|c| c.goal).collect(), self.epsilon_g)
            .expect("validated scenario has goals")
    }
}
