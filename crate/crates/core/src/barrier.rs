//! Workspace reachability sets and their log-barrier absorption into the
//! hand objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Real};
use crate::se3::{Pose, PoseDelta};

/// Region a hand is allowed to occupy. Only the hand position is constrained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWorkspace<T>", into = "RawWorkspace<T>")]
pub enum WorkspaceSet<T: Real> {
    /// Axis-aligned box `min <= p <= max`.
    Box { min: [T; 3], max: [T; 3] },
    /// `normal · p <= offset`.
    HalfSpace { normal: [T; 3], offset: T },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawWorkspace<T> {
    Box { min: [T; 3], max: [T; 3] },
    HalfSpace { normal: [T; 3], offset: T },
}

impl<T: Real> TryFrom<RawWorkspace<T>> for WorkspaceSet<T> {
    type Error = Error;
    fn try_from(raw: RawWorkspace<T>) -> Result<Self> {
        match raw {
            RawWorkspace::Box { min, max } => WorkspaceSet::new_box(min, max),
            RawWorkspace::HalfSpace { normal, offset } => WorkspaceSet::new_half_space(normal, offset),
        }
    }
}

impl<T: Real> From<WorkspaceSet<T>> for RawWorkspace<T> {
    fn from(w: WorkspaceSet<T>) -> Self {
        match w {
            WorkspaceSet::Box { min, max } => RawWorkspace::Box { min, max },
            WorkspaceSet::HalfSpace { normal, offset } => RawWorkspace::HalfSpace { normal, offset },
        }
    }
}

impl<T: Real> WorkspaceSet<T> {
    pub fn new_box(min: [T; 3], max: [T; 3]) -> Result<Self> {
        if (0..3).any(|k| !(min[k] < max[k])) {
            return Err(Error::InvalidParameter(format!(
                "workspace box needs min < max on every axis (min={min:?}, max={max:?})"
            )));
        }
        Ok(WorkspaceSet::Box { min, max })
    }

    pub fn new_half_space(normal: [T; 3], offset: T) -> Result<Self> {
        let n = norm(&normal);
        if !(n > T::zero()) || !n.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half-space normal must be non-zero and finite (normal={normal:?})"
            )));
        }
        Ok(WorkspaceSet::HalfSpace { normal, offset })
    }

    /// Signed distance to the boundary and its gradient with respect to position.
    pub fn value_and_gradient(&self, p: &[T; 3]) -> (T, [T; 3]) {
        match self {
            WorkspaceSet::HalfSpace { normal, offset } => {
                let n = norm(normal);
                let v = (dot(normal, p) - *offset) / n;
                (v, normal.map(|x| x / n))
            }
            WorkspaceSet::Box { min, max } => {
                let clamped = [0, 1, 2].map(|k| p[k].max(min[k]).min(max[k]));
                let q = [0, 1, 2].map(|k| p[k] - clamped[k]);
                let outside = norm(&q);
                if outside > T::zero() {
                    return (outside, q.map(|x| x / outside));
                }
                // inside or on the boundary: distance to the nearest face
                let mut best = T::infinity();
                let mut grad = [T::zero(); 3];
                for k in 0..3 {
                    let lo = p[k] - min[k];
                    if lo < best {
                        best = lo;
                        grad = [T::zero(); 3];
                        grad[k] = -T::one();
                    }
                    let hi = max[k] - p[k];
                    if hi < best {
                        best = hi;
                        grad = [T::zero(); 3];
                        grad[k] = T::one();
                    }
                }
                (-best, grad)
            }
        }
    }

    pub fn contains(&self, p: &[T; 3]) -> bool {
        self.value_and_gradient(p).0 <= T::zero()
    }
}

/// Signed distance of the hand position to the workspace boundary:
/// negative inside, positive outside.
pub fn inequality_value<T: Real>(h: &Pose<T>, ws: &WorkspaceSet<T>) -> T {
    ws.value_and_gradient(&h.position()).0
}

/// Barrier weight and activation distance.
///
/// With `margin == 0` the barrier is the plain `-mu·ln(-f)`. With a positive
/// margin `m` it is truncated to the band `-f < m` as
/// `mu·(-ln(s/m) + s/m - 1)`, `s = -f`, which vanishes with zero slope at the
/// edge of the band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams<T> {
    pub mu: T,
    pub margin: T,
}

impl<T: Real> Default for BarrierParams<T> {
    fn default() -> Self {
        BarrierParams {
            mu: T::lit(0.01),
            margin: T::lit(0.01),
        }
    }
}

impl<T: Real> BarrierParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero()) || !(self.margin >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "barrier needs mu > 0 and margin >= 0 (mu={}, margin={})",
                self.mu, self.margin
            )));
        }
        Ok(())
    }
}

/// Barrier cost and its gradient over the hand position.
pub fn barrier_cost_and_gradient<T: Real>(
    h: &Pose<T>,
    ws: &WorkspaceSet<T>,
    params: &BarrierParams<T>,
) -> Result<(T, [T; 3])> {
    let (f, df) = ws.value_and_gradient(&h.position());
    if !(f < T::zero()) {
        return Err(Error::Infeasible(format!(
            "hand at {:?} is not strictly inside its workspace (f = {f})",
            h.position()
        )));
    }
    let s = -f;
    let m = params.margin;
    if m == T::zero() {
        let cost = -params.mu * s.ln();
        let scale = -params.mu / f;
        return Ok((cost, df.map(|x| scale * x)));
    }
    if s >= m {
        return Ok((T::zero(), [T::zero(); 3]));
    }
    let cost = params.mu * (-(s / m).ln() + s / m - T::one());
    // d/ds = mu (-1/s + 1/m), ds/dp = -df
    let dcost_ds = params.mu * (-T::one() / s + T::one() / m);
    Ok((cost, df.map(|x| -dcost_ds * x)))
}

/// Minimal position change that brings the hand to `inequality_value <= -slack`.
/// Angles are left untouched.
pub fn project_into<T: Real>(h: &Pose<T>, ws: &WorkspaceSet<T>, slack: T) -> Result<Pose<T>> {
    if !(slack > T::zero()) {
        return Err(Error::InvalidParameter(format!("projection slack must be > 0, got {slack}")));
    }
    let p = h.position();
    match ws {
        WorkspaceSet::Box { min, max } => {
            let mut out = p;
            for k in 0..3 {
                let lo = min[k] + slack;
                let hi = max[k] - slack;
                if lo > hi {
                    return Err(Error::EmptyRegion(format!(
                        "box axis {k} is narrower than twice the slack {slack}"
                    )));
                }
                out[k] = p[k].max(lo).min(hi);
            }
            h.with_position(out)
        }
        WorkspaceSet::HalfSpace { .. } => {
            let (f, n) = ws.value_and_gradient(&p);
            if f <= -slack {
                return Ok(*h);
            }
            // nudge past round-off so the result is a fixed point of the projection
            let mut shift = f + slack;
            let nudge = T::epsilon() * (T::one() + norm(&p) + slack);
            for _ in 0..8 {
                let q = [0, 1, 2].map(|k| p[k] - shift * n[k]);
                if ws.value_and_gradient(&q).0 <= -slack {
                    return h.with_position(q);
                }
                shift = shift + nudge;
            }
            h.with_position([0, 1, 2].map(|k| p[k] - shift * n[k]))
        }
    }
}

/// Extension point for equality constraints on the hand pose. The planner adds
/// `rho·r²` to the hand objective for the returned residual `r`.
pub trait EqualityConstraint<T: Real>: Send + Sync {
    /// Residual and its gradient in pose coordinates.
    fn residual_and_gradient(&self, h: &Pose<T>) -> (T, PoseDelta<T>);
}

/// No equality constraints are instantiated for tabletop assembly.
pub fn equality_hook<T: Real>(_h: &Pose<T>) -> T {
    T::zero()
}

pub fn equality_penalty<T: Real>(residual: T, rho: T) -> T {
    rho * residual * residual
}
