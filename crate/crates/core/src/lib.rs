//! Decentralised gradient-based planning for multi-hand sequential assembly.
//!
//! Every hand independently picks the component whose hand-component energy
//! is smallest and takes one gradient step on it, with a log-barrier keeping
//! the hand inside its workspace. Parts that have to cross workspaces do so
//! because each hand drives them only as far as it can reach.
//!
//! The numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

// `!(x > 0)` is used deliberately throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod energy;
pub mod error;
pub mod planner;
pub mod scalar;
pub mod scenario;
pub mod se3;
pub mod sim;
pub mod world;

pub use barrier::{
    barrier_cost_and_gradient, equality_hook, equality_penalty, inequality_value, project_into,
    BarrierParams, EqualityConstraint, WorkspaceSet,
};
pub use energy::{
    contact_prob, goal_loss, hand_energy, hand_energy_gradient, in_contact, smooth_contact_prob,
    surrogate_energy, ContactParams, EnergyGradient, EnergyReport, GoalSpec,
};
pub use error::{Error, Result};
pub use planner::{is_converged, masked_argmin, Arbitration, HandDecision, Planner, PlannerConfig};
pub use scalar::{wrap_angle, Real};
pub use scenario::{Scenario, BUNDLED};
pub use se3::{embed, embedded_sq_distance, pullback_gradient, EmbeddedPose, Pose, PoseDelta, RigidTransform};
pub use sim::{
    init_world, run, run_from, DisturbanceAction, DisturbanceEvent, EventKind, EventLog, EventRecord,
    LossTrace, RunOutcome, Simulator, TraceRow, CONVERGENCE_THRESHOLD,
};
pub use world::{Grasp, WorldState, Workcell};

pub type Pose64 = Pose<f64>;
pub type PoseDelta64 = PoseDelta<f64>;
pub type WorldState64 = WorldState<f64>;
pub type Workcell64 = Workcell<f64>;
pub type GoalSpec64 = GoalSpec<f64>;
pub type PlannerConfig64 = PlannerConfig<f64>;
pub type Scenario64 = Scenario<f64>;
pub type RunOutcome64 = RunOutcome<f64>;
pub type HandDecision64 = HandDecision<f64>;
