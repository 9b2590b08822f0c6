//! Goal loss, contact pseudo-probability and the per-hand, per-component energy.
//!
//! The hard contact indicator decides attachment and gating. Its gradient is
//! zero almost everywhere, so the hand-side descent direction comes from the
//! Gaussian surrogate `exp(-d²/σ²)` instead. The component cannot move itself,
//! so no gradient ever flows into the component through the contact factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::se3::{embed, embedded_sq_distance, EmbeddedPose, Pose, EMBEDDED_DIM};

/// Target pose of every component plus the completion threshold on the goal loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec<T: Real> {
    targets: Vec<Pose<T>>,
    epsilon_g: T,
}

impl<T: Real> GoalSpec<T> {
    pub fn new(targets: Vec<Pose<T>>, epsilon_g: T) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidParameter("goal spec needs at least one target".into()));
        }
        if !(epsilon_g > T::zero()) {
            return Err(Error::InvalidParameter(format!("epsilon_g must be > 0, got {epsilon_g}")));
        }
        Ok(GoalSpec { targets, epsilon_g })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target(&self, n: usize) -> &Pose<T> {
        &self.targets[n]
    }

    pub fn targets(&self) -> &[Pose<T>] {
        &self.targets
    }

    pub fn embedded_target(&self, n: usize) -> EmbeddedPose<T> {
        embed(&self.targets[n])
    }

    pub fn epsilon_g(&self) -> T {
        self.epsilon_g
    }

    pub fn set_epsilon_g(&mut self, v: T) -> Result<()> {
        if !(v > T::zero()) {
            return Err(Error::InvalidParameter(format!("epsilon_g must be > 0, got {v}")));
        }
        self.epsilon_g = v;
        Ok(())
    }

    /// Goal loss of component `n` at pose `c`.
    pub fn loss(&self, n: usize, c: &Pose<T>) -> T {
        goal_loss(&embed(c), &self.embedded_target(n))
    }
}

/// Contact threshold `epsilon` and the surrogate smoothing length `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactParams<T> {
    pub epsilon: T,
    pub sigma: T,
}

impl<T: Real> Default for ContactParams<T> {
    fn default() -> Self {
        ContactParams {
            epsilon: T::lit(0.02 * 0.02),
            sigma: T::lit(1.0),
        }
    }
}

impl<T: Real> ContactParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !(self.sigma > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "contact epsilon and sigma must be > 0 (epsilon={}, sigma={})",
                self.epsilon, self.sigma
            )));
        }
        Ok(())
    }
}

pub fn goal_loss<T: Real>(c: &EmbeddedPose<T>, target: &EmbeddedPose<T>) -> T {
    embedded_sq_distance(c, target)
}

/// Hard contact indicator: 1 when `d²(c, h) < epsilon`, else 0.
pub fn contact_prob<T: Real>(h: &EmbeddedPose<T>, c: &EmbeddedPose<T>, params: &ContactParams<T>) -> T {
    if in_contact(h, c, params) {
        T::one()
    } else {
        T::zero()
    }
}

pub fn in_contact<T: Real>(h: &EmbeddedPose<T>, c: &EmbeddedPose<T>, params: &ContactParams<T>) -> bool {
    embedded_sq_distance(c, h) < params.epsilon
}

pub fn smooth_contact_prob<T: Real>(
    h: &EmbeddedPose<T>,
    c: &EmbeddedPose<T>,
    params: &ContactParams<T>,
) -> T {
    let d2 = embedded_sq_distance(c, h);
    (-d2 / (params.sigma * params.sigma)).exp()
}

/// Selection scalar for hand `h` working on component `c`.
///
/// `Ps·g + (1 - Ps)·(d² + g)`: in contact this is the goal loss, far away it
/// adds the squared reach distance so the closest remaining work wins.
pub fn hand_energy<T: Real>(
    h: &EmbeddedPose<T>,
    c: &EmbeddedPose<T>,
    target: &EmbeddedPose<T>,
    params: &ContactParams<T>,
) -> T {
    let g = goal_loss(c, target);
    let ps = smooth_contact_prob(h, c, params);
    let reach = embedded_sq_distance(c, h) + g;
    ps * g + (T::one() - ps) * reach
}

/// Scalar whose partial derivatives, with the stop-gradient rules applied,
/// are the two halves of [`hand_energy_gradient`]:
/// `sg[g(c)]·(1 - Ps(h, sg[c])) + sg[P(h, c)]·g(c)`.
pub fn surrogate_energy<T: Real>(
    h: &EmbeddedPose<T>,
    c: &EmbeddedPose<T>,
    target: &EmbeddedPose<T>,
    params: &ContactParams<T>,
) -> T {
    let g = goal_loss(c, target);
    g * (T::one() - smooth_contact_prob(h, c, params)) + contact_prob(h, c, params) * g
}

/// Gradients over the hand and component embedded coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyGradient<T> {
    pub hand: [T; EMBEDDED_DIM],
    pub component: [T; EMBEDDED_DIM],
}

/// `hand = -g(c)·∇h Ps` pulls the hand towards contact with the goal loss as
/// gain; `component = P·∇c g` moves a grasped part to its target and is zero
/// without contact.
pub fn hand_energy_gradient<T: Real>(
    h: &EmbeddedPose<T>,
    c: &EmbeddedPose<T>,
    target: &EmbeddedPose<T>,
    params: &ContactParams<T>,
) -> EnergyGradient<T> {
    let (ha, ca, ta) = (h.to_array(), c.to_array(), target.to_array());
    let g = goal_loss(c, target);
    let ps = smooth_contact_prob(h, c, params);
    let p = contact_prob(h, c, params);
    let two = T::lit(2.0);
    let gain = -g * ps * two / (params.sigma * params.sigma);
    let mut grad = EnergyGradient {
        hand: [T::zero(); EMBEDDED_DIM],
        component: [T::zero(); EMBEDDED_DIM],
    };
    for k in 0..EMBEDDED_DIM {
        grad.hand[k] = gain * (ca[k] - ha[k]);
        grad.component[k] = p * two * (ca[k] - ta[k]);
    }
    grad
}

/// Per-hand view of all candidate energies and the chosen sub-goal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport<T> {
    pub per_component_energy: Vec<T>,
    pub feasible_mask: Vec<bool>,
    pub selected: Option<usize>,
    pub hand_gradient: [T; EMBEDDED_DIM],
}
