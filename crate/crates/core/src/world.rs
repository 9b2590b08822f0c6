use serde::{Deserialize, Serialize};

use crate::barrier::WorkspaceSet;
use crate::scalar::Real;
use crate::se3::{Pose, RigidTransform, Rotation};

/// Static description of the hands: where each may move and where it rests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workcell<T: Real> {
    pub workspaces: Vec<WorkspaceSet<T>>,
    pub homes: Vec<Pose<T>>,
}

impl<T: Real> Workcell<T> {
    pub fn num_hands(&self) -> usize {
        self.workspaces.len()
    }
}

/// A held component and its pose in the hand frame, frozen at first contact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grasp<T> {
    pub component: usize,
    pub relative: RigidTransform<T>,
}

/// Serialized grasp: component index plus the frozen relative pose.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct RawGrasp<T: Real> {
    component: usize,
    relative: Pose<T>,
}

impl<T: Real + Serialize> Serialize for Grasp<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let relative = Pose::new(self.relative.translation, self.relative.rotation.to_rpy())
            .map_err(serde::ser::Error::custom)?;
        RawGrasp { component: self.component, relative }.serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Grasp<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawGrasp::<T>::deserialize(d)?;
        Ok(Grasp {
            component: raw.component,
            relative: RigidTransform {
                rotation: Rotation::from_rpy(&raw.relative.angles()),
                translation: raw.relative.position(),
            },
        })
    }
}

/// Poses of every hand and component, the grasp map and bookkeeping that the
/// event log needs (last selections and the last hand to release each part).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState<T: Real> {
    pub step: u64,
    pub hands: Vec<Pose<T>>,
    pub components: Vec<Pose<T>>,
    pub attach: Vec<Option<Grasp<T>>>,
    pub selected: Vec<Option<usize>>,
    pub released_by: Vec<Option<usize>>,
    pub rng_seed: u64,
}

impl<T: Real> WorldState<T> {
    pub fn new(hands: Vec<Pose<T>>, components: Vec<Pose<T>>, rng_seed: u64) -> Self {
        let (i, n) = (hands.len(), components.len());
        WorldState {
            step: 0,
            hands,
            components,
            attach: vec![None; i],
            selected: vec![None; i],
            released_by: vec![None; n],
            rng_seed,
        }
    }

    pub fn num_hands(&self) -> usize {
        self.hands.len()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Component held by `hand`, if any.
    pub fn held_by(&self, hand: usize) -> Option<usize> {
        self.attach[hand].map(|g| g.component)
    }

    /// Hand holding component `n`, if any.
    pub fn holder_of(&self, n: usize) -> Option<usize> {
        self.attach.iter().position(|g| g.map(|g| g.component) == Some(n))
    }
}
