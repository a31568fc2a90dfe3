//! Planar rigid-body poses, twists and wrenches.
//!
//! Frames used across the crate: the wall frame `C_w` (inertial), the robot
//! body frame `C_r` at the center of mass, shoulder frames `C_si` fixed to the
//! body at each boom base, boom frames `C_bi` at each boom tip, and local wall
//! frames `C_wi` at each anchor. All of them are related by [`PlanarPose`]s.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::Vec2;

/// Wraps an angle to `(-pi, pi]`. Angles already in range are returned
/// unchanged, so wrapping is idempotent bit-for-bit.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let w = angle.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Shortest signed arc from `to` to `from`, i.e. `wrap(from - to)`.
pub fn angle_diff(from: f64, to: f64) -> f64 {
    wrap_angle(from - to)
}

/// Counter-clockwise rotation by `angle`.
pub fn rotation(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Unit vector at bearing `angle`.
pub fn unit(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c, s)
}

/// Rotates a vector by +pi/2.
pub fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Scalar planar cross product `a x b`.
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Position and orientation of a frame relative to a parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawPose", into = "RawPose")]
pub struct PlanarPose {
    p: Vec2,
    phi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    position_m: [f64; 2],
    angle_rad: f64,
}

impl From<RawPose> for PlanarPose {
    fn from(raw: RawPose) -> Self {
        PlanarPose::new(Vec2::from(raw.position_m), raw.angle_rad)
    }
}

impl From<PlanarPose> for RawPose {
    fn from(pose: PlanarPose) -> Self {
        RawPose {
            position_m: pose.p.into(),
            angle_rad: pose.phi,
        }
    }
}

impl Default for PlanarPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl PlanarPose {
    pub fn new(position: Vec2, angle: f64) -> Self {
        Self {
            p: position,
            phi: wrap_angle(angle),
        }
    }

    pub fn identity() -> Self {
        Self {
            p: Vec2::zeros(),
            phi: 0.0,
        }
    }

    pub fn position(&self) -> Vec2 {
        self.p
    }

    /// Orientation in `(-pi, pi]`.
    pub fn angle(&self) -> f64 {
        self.phi
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rotation(self.phi)
    }

    /// `self ∘ other`: places `other`'s frame, given relative to `self`, in
    /// `self`'s parent frame.
    pub fn compose(&self, other: &PlanarPose) -> PlanarPose {
        PlanarPose::new(self.p + self.rotation() * other.p, self.phi + other.phi)
    }

    pub fn inverse(&self) -> PlanarPose {
        PlanarPose::new(-(self.rotation().transpose() * self.p), -self.phi)
    }

    /// Maps a point given in this frame to the parent frame.
    pub fn transform_point(&self, point: &Vec2) -> Vec2 {
        self.p + self.rotation() * point
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|c| c.is_finite()) && self.phi.is_finite()
    }
}

/// Planar rigid-body velocity: linear part `v` and angular rate `w`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: Vec2,
    pub w: f64,
}

impl Twist {
    pub fn new(v: Vec2, w: f64) -> Self {
        Self { v, w }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vector3<f64>) -> Self {
        Self::new(Vec2::new(x[0], x[1]), x[2])
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.v.x, self.v.y, self.w)
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|c| c.is_finite()) && self.w.is_finite()
    }
}

/// Planar force `f` and moment `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub f: Vec2,
    pub tau: f64,
}

impl Wrench {
    pub fn new(f: Vec2, tau: f64) -> Self {
        Self { f, tau }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vector3<f64>) -> Self {
        Self::new(Vec2::new(x[0], x[1]), x[2])
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.f.x, self.f.y, self.tau)
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().all(|c| c.is_finite()) && self.tau.is_finite()
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.f + rhs.f, self.tau + rhs.tau)
    }
}

impl Sub for Wrench {
    type Output = Wrench;
    fn sub(self, rhs: Wrench) -> Wrench {
        Wrench::new(self.f - rhs.f, self.tau - rhs.tau)
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench::new(-self.f, -self.tau)
    }
}

impl Mul<f64> for Wrench {
    type Output = Wrench;
    fn mul(self, k: f64) -> Wrench {
        Wrench::new(self.f * k, self.tau * k)
    }
}

/// Planar transition matrix.
///
/// `rel` is the pose of a target frame expressed in a source frame. The
/// returned matrix maps a twist expressed in the source frame (about its
/// origin) to the same rigid motion expressed in the target frame (about the
/// target origin):
///
/// ```text
/// T = [ Rᵀ   Rᵀ·perp(p) ]      perp(p) = (-p_y, p_x)
///     [ 0        1      ]
/// ```
///
/// Its transpose maps a wrench acting at the target frame back to the source
/// frame, `τ_src = τ + p × (R f)`, so `⟨T V, W⟩ = ⟨V, Tᵀ W⟩`.
pub fn transition_matrix(rel: &PlanarPose) -> Matrix3<f64> {
    let rt = rel.rotation().transpose();
    let lever = rt * perp(&rel.position());
    Matrix3::new(
        rt[(0, 0)],
        rt[(0, 1)],
        lever.x,
        rt[(1, 0)],
        rt[(1, 1)],
        lever.y,
        0.0,
        0.0,
        1.0,
    )
}
