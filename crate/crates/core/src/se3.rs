//! Poses, the universal-joint embedding, and the small amount of rigid-body
//! algebra needed to carry a grasped component.
//!
//! A [`Pose`] keeps a translation and three roll/pitch/yaw angles. Every angle
//! is mapped to a `(sin, cos)` pair by [`embed`], so distances between poses
//! are taken in a 9-dimensional space without angle wraparound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Real};

/// Dimension of the embedded pose vector (3 positions + 3 sin/cos pairs).
pub const EMBEDDED_DIM: usize = 9;

/// Position plus roll/pitch/yaw angles. Angles are always kept in (-pi, pi].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose<T>", into = "RawPose<T>")]
pub struct Pose<T: Real> {
    position: [T; 3],
    angles: [T; 3],
}

/// Wire/file form of a pose: `{ p = [x, y, z], r = [roll, pitch, yaw] }`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RawPose<T: Real> {
    pub p: [T; 3],
    #[serde(default = "zero3")]
    pub r: [T; 3],
}

fn zero3<T: Default + Copy>() -> [T; 3] {
    [T::default(); 3]
}

impl<T: Real> TryFrom<RawPose<T>> for Pose<T> {
    type Error = Error;
    fn try_from(raw: RawPose<T>) -> Result<Self> {
        Pose::new(raw.p, raw.r)
    }
}

impl<T: Real> From<Pose<T>> for RawPose<T> {
    fn from(p: Pose<T>) -> Self {
        RawPose { p: p.position, r: p.angles }
    }
}

impl<T: Real> Pose<T> {
    pub fn new(position: [T; 3], angles: [T; 3]) -> Result<Self> {
        if position.iter().chain(angles.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose(format!(
                "non-finite component in position {position:?} / angles {angles:?}"
            )));
        }
        Ok(Pose {
            position,
            angles: angles.map(wrap_angle),
        })
    }

    /// Tabletop pose: `z = 0`, zero roll and pitch.
    pub fn planar(x: T, y: T, yaw: T) -> Result<Self> {
        Pose::new([x, y, T::zero()], [T::zero(), T::zero(), yaw])
    }

    pub fn identity() -> Self {
        Pose {
            position: [T::zero(); 3],
            angles: [T::zero(); 3],
        }
    }

    pub fn position(&self) -> [T; 3] {
        self.position
    }

    pub fn angles(&self) -> [T; 3] {
        self.angles
    }

    pub fn yaw(&self) -> T {
        self.angles[2]
    }

    /// Applies a tangent step: positions add, angles add and re-wrap.
    ///
    /// A non-finite step leaves the pose unchanged.
    pub fn advanced(&self, d: &PoseDelta<T>) -> Pose<T> {
        let mut position = self.position;
        let mut angles = self.angles;
        for k in 0..3 {
            position[k] = position[k] + d.position[k];
            angles[k] = angles[k] + d.angles[k];
        }
        Pose::new(position, angles).unwrap_or(*self)
    }

    /// Tangent step that takes `self` to `other`, with wrapped angle differences.
    pub fn delta_to(&self, other: &Pose<T>) -> PoseDelta<T> {
        let mut d = PoseDelta::zero();
        for k in 0..3 {
            d.position[k] = other.position[k] - self.position[k];
            d.angles[k] = wrap_angle(other.angles[k] - self.angles[k]);
        }
        d
    }

    /// Copy with a replaced position; angles untouched.
    pub fn with_position(&self, position: [T; 3]) -> Result<Pose<T>> {
        Pose::new(position, self.angles)
    }

    pub fn cast<U: Real>(&self) -> Pose<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        Pose {
            position: self.position.map(c),
            angles: self.angles.map(c),
        }
    }
}

/// Tangent vector in pose coordinates (position rate + angle rate).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta<T> {
    pub position: [T; 3],
    pub angles: [T; 3],
}

impl<T: Real> PoseDelta<T> {
    pub fn zero() -> Self {
        PoseDelta {
            position: [T::zero(); 3],
            angles: [T::zero(); 3],
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        PoseDelta {
            position: self.position.map(|v| v * s),
            angles: self.angles.map(|v| v * s),
        }
    }

    pub fn plus(&self, o: &PoseDelta<T>) -> Self {
        let mut r = *self;
        for k in 0..3 {
            r.position[k] = r.position[k] + o.position[k];
            r.angles[k] = r.angles[k] + o.angles[k];
        }
        r
    }

    pub fn is_zero(&self) -> bool {
        self.position
            .iter()
            .chain(self.angles.iter())
            .all(|v| *v == T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.angles.iter())
            .all(|v| v.is_finite())
    }

    pub fn linear_norm(&self) -> T {
        crate::scalar::norm(&self.position)
    }

    pub fn angular_norm(&self) -> T {
        crate::scalar::norm(&self.angles)
    }

    /// Scales the translational and rotational parts independently so neither
    /// exceeds its cap. Each block keeps its direction.
    pub fn clamped(&self, max_linear: T, max_angular: T) -> Self {
        let mut r = *self;
        let lin = self.linear_norm();
        if lin > max_linear {
            let s = max_linear / lin;
            r.position = r.position.map(|v| v * s);
        }
        let ang = self.angular_norm();
        if ang > max_angular {
            let s = max_angular / ang;
            r.angles = r.angles.map(|v| v * s);
        }
        r
    }
}

/// Pose after the universal-joint embedding: position and `[sin, cos]` per angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPose<T> {
    pub position: [T; 3],
    pub trig: [T; 6],
}

impl<T: Real> EmbeddedPose<T> {
    pub fn to_array(&self) -> [T; EMBEDDED_DIM] {
        let mut v = [T::zero(); EMBEDDED_DIM];
        v[..3].copy_from_slice(&self.position);
        v[3..].copy_from_slice(&self.trig);
        v
    }
}

pub fn embed<T: Real>(p: &Pose<T>) -> EmbeddedPose<T> {
    let mut trig = [T::zero(); 6];
    for (k, a) in p.angles.iter().enumerate() {
        let (s, c) = a.sin_cos();
        trig[2 * k] = s;
        trig[2 * k + 1] = c;
    }
    EmbeddedPose {
        position: p.position,
        trig,
    }
}

/// Squared Euclidean distance over the 9-vector `position ⊕ trig`.
pub fn embedded_sq_distance<T: Real>(a: &EmbeddedPose<T>, b: &EmbeddedPose<T>) -> T {
    let (a, b) = (a.to_array(), b.to_array());
    a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

/// Per-dimension weights for the embedded metric. The default weights are all
/// one, which reproduces [`embedded_sq_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingWeights<T>(pub [T; EMBEDDED_DIM]);

impl<T: Real> Default for EmbeddingWeights<T> {
    fn default() -> Self {
        EmbeddingWeights([T::one(); EMBEDDED_DIM])
    }
}

impl<T: Real> EmbeddingWeights<T> {
    pub fn sq_distance(&self, a: &EmbeddedPose<T>, b: &EmbeddedPose<T>) -> T {
        let (a, b) = (a.to_array(), b.to_array());
        (0..EMBEDDED_DIM)
            .map(|k| self.0[k] * (a[k] - b[k]) * (a[k] - b[k]))
            .sum()
    }
}

/// Maps a gradient taken in embedded coordinates back to pose coordinates
/// (`d sin = cos dθ`, `d cos = -sin dθ`).
pub fn pullback_gradient<T: Real>(p: &Pose<T>, grad: &[T; EMBEDDED_DIM]) -> PoseDelta<T> {
    let mut d = PoseDelta::zero();
    d.position.copy_from_slice(&grad[..3]);
    for k in 0..3 {
        let (s, c) = p.angles[k].sin_cos();
        d.angles[k] = grad[3 + 2 * k] * c - grad[4 + 2 * k] * s;
    }
    d
}

/// Row-major 3x3 rotation matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T>(pub [[T; 3]; 3]);

impl<T: Real> Rotation<T> {
    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_rpy(a: &[T; 3]) -> Self {
        let (sr, cr) = a[0].sin_cos();
        let (sp, cp) = a[1].sin_cos();
        let (sy, cy) = a[2].sin_cos();
        Rotation([
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ])
    }

    pub fn to_rpy(&self) -> [T; 3] {
        let m = &self.0;
        let sp = (-m[2][0]).max(-T::one()).min(T::one());
        let pitch = sp.asin();
        let roll = m[2][1].atan2(m[2][2]);
        let yaw = m[1][0].atan2(m[0][0]);
        [roll, pitch, yaw]
    }

    pub fn mul(&self, o: &Rotation<T>) -> Rotation<T> {
        let mut r = [[T::zero(); 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Rotation(r)
    }

    pub fn transpose(&self) -> Rotation<T> {
        let m = &self.0;
        Rotation([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn apply(&self, v: &[T; 3]) -> [T; 3] {
        let m = &self.0;
        [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    }
}

/// Pose of a body expressed in another body's frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: Rotation<T>,
    pub translation: [T; 3],
}

impl<T: Real> RigidTransform<T> {
    /// Transform of `child` in the frame of `parent`.
    pub fn relative(parent: &Pose<T>, child: &Pose<T>) -> Self {
        let rp = Rotation::from_rpy(&parent.angles);
        let rc = Rotation::from_rpy(&child.angles);
        let rpt = rp.transpose();
        let dp = [0, 1, 2].map(|k| child.position[k] - parent.position[k]);
        RigidTransform {
            rotation: rpt.mul(&rc),
            translation: rpt.apply(&dp),
        }
    }

    /// World pose of a body rigidly attached to `parent` by `self`.
    pub fn child_of(&self, parent: &Pose<T>) -> Pose<T> {
        let rp = Rotation::from_rpy(&parent.angles);
        let off = rp.apply(&self.translation);
        let position = [0, 1, 2].map(|k| parent.position[k] + off[k]);
        let angles = rp.mul(&self.rotation).to_rpy();
        Pose::new(position, angles).unwrap_or(*parent)
    }

    /// World pose of the parent given the world pose of the attached child.
    pub fn parent_of(&self, child: &Pose<T>) -> Pose<T> {
        let rc = Rotation::from_rpy(&child.angles);
        let rp = rc.mul(&self.rotation.transpose());
        let off = rp.apply(&self.translation);
        let position = [0, 1, 2].map(|k| child.position[k] - off[k]);
        Pose::new(position, rp.to_rpy()).unwrap_or(*child)
    }
}
