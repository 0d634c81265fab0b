//! Frames, ZYX Euler poses and homogeneous transforms.
//!
//! Every transform carries the pair of frames it relates. A transform
//! `a -> b` holds the pose of frame `b` expressed in frame `a`, so composing
//! `a -> b` with `b -> c` yields `a -> c`. Translations are millimetres and
//! angles radians. The only Euler convention used anywhere in the crate is
//! `R = Rz(gamma) * Ry(beta) * Rx(alpha)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Orthonormality tolerance for rotation blocks.
pub const ORTHONORMAL_TOL: f64 = 1e-9;
/// Distance from |beta| = pi/2 below which the ZYX decomposition is refused.
pub const GIMBAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameId {
    World,
    LeftFoot,
    RightFoot,
    FloatingBase,
    Camera,
}

/// Left or right side of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn foot_frame(self) -> FrameId {
        match self {
            Side::Left => FrameId::LeftFoot,
            Side::Right => FrameId::RightFoot,
        }
    }

    pub fn from_foot_frame(frame: FrameId) -> Option<Side> {
        match frame {
            FrameId::LeftFoot => Some(Side::Left),
            FrameId::RightFoot => Some(Side::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("frame chain mismatch: expected a transform starting at {expected:?}, got {found:?}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("frame {0:?} is not a foot frame")]
    NotAFoot(FrameId),
    #[error("gimbal degeneracy: pitch {0} rad is within {GIMBAL_TOL} of +/-pi/2")]
    GimbalDegenerate(f64),
    #[error("rotation block is not orthonormal (max |R^T R - I| = {0:e})")]
    NotOrthonormal(f64),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let wrapped = a.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// ZYX Euler angles: `alpha` about x, `beta` about y, `gamma` about z.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZyx {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EulerZyx {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha: normalize_angle(alpha),
            beta: normalize_angle(beta),
            gamma: normalize_angle(gamma),
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.gamma) * rot_y(self.beta) * rot_x(self.alpha)
    }

    /// Decomposes `R = Rz(gamma) Ry(beta) Rx(alpha)`.
    pub fn from_rotation(r: &Matrix3<f64>) -> Result<Self, GeometryError> {
        let beta = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        if FRAC_PI_2 - beta.abs() < GIMBAL_TOL {
            return Err(GeometryError::GimbalDegenerate(beta));
        }
        let alpha = r[(2, 1)].atan2(r[(2, 2)]);
        let gamma = r[(1, 0)].atan2(r[(0, 0)]);
        Ok(Self::new(alpha, beta, gamma))
    }
}

/// Rigid transform `from -> to` (pose of `to` expressed in `from`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PoseRecord", try_from = "PoseRecord")]
pub struct HomTransform {
    pub from: FrameId,
    pub to: FrameId,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl HomTransform {
    pub fn new(
        from: FrameId,
        to: FrameId,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > ORTHONORMAL_TOL || rotation.determinant() < 0.0 {
            return Err(GeometryError::NotOrthonormal(err));
        }
        Ok(Self {
            from,
            to,
            rotation,
            translation,
        })
    }

    pub fn identity(frame: FrameId) -> Self {
        Self {
            from: frame,
            to: frame,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_euler(from: FrameId, to: FrameId, xyz: Vector3<f64>, rpy: EulerZyx) -> Self {
        Self {
            from,
            to,
            rotation: rpy.rotation(),
            translation: xyz,
        }
    }

    pub fn translation_only(from: FrameId, to: FrameId, xyz: Vector3<f64>) -> Self {
        Self {
            from,
            to,
            rotation: Matrix3::identity(),
            translation: xyz,
        }
    }

    /// `self: F0 -> F1` composed with `next: F1 -> F2` gives `F0 -> F2`.
    pub fn compose(&self, next: &HomTransform) -> Result<HomTransform, GeometryError> {
        if self.to != next.from {
            return Err(GeometryError::FrameMismatch {
                expected: self.to,
                found: next.from,
            });
        }
        Ok(HomTransform {
            from: self.from,
            to: next.to,
            rotation: self.rotation * next.rotation,
            translation: self.rotation * next.translation + self.translation,
        })
    }

    pub fn inverse(&self) -> HomTransform {
        let rt = self.rotation.transpose();
        HomTransform {
            from: self.to,
            to: self.from,
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn euler(&self) -> Result<EulerZyx, GeometryError> {
        EulerZyx::from_rotation(&self.rotation)
    }

    pub fn relabel(mut self, from: FrameId, to: FrameId) -> Self {
        self.from = from;
        self.to = to;
        self
    }
}

/// Serialized pose: `{frame_from, frame_to, xyz_mm, rpy_rad}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame_from: FrameId,
    pub frame_to: FrameId,
    pub xyz_mm: [f64; 3],
    pub rpy_rad: [f64; 3],
}

impl From<HomTransform> for PoseRecord {
    fn from(t: HomTransform) -> Self {
        // Serializing a gimbal-locked pose has no faithful ZYX form; fall back
        // to the clamped decomposition, which still reconstructs the matrix.
        let e = t.euler().unwrap_or_else(|_| {
            let beta = (-t.rotation[(2, 0)]).clamp(-1.0, 1.0).asin();
            EulerZyx {
                alpha: 0.0,
                beta,
                gamma: (-t.rotation[(0, 1)]).atan2(t.rotation[(1, 1)]),
            }
        });
        PoseRecord {
            frame_from: t.from,
            frame_to: t.to,
            xyz_mm: [t.translation.x, t.translation.y, t.translation.z],
            rpy_rad: [e.alpha, e.beta, e.gamma],
        }
    }
}

impl TryFrom<PoseRecord> for HomTransform {
    type Error = GeometryError;

    fn try_from(p: PoseRecord) -> Result<Self, Self::Error> {
        let e = EulerZyx::new(p.rpy_rad[0], p.rpy_rad[1], p.rpy_rad[2]);
        Ok(HomTransform::from_euler(
            p.frame_from,
            p.frame_to,
            Vector3::from(p.xyz_mm),
            e,
        ))
    }
}

/// 6-DoF foot pose `[x y z alpha beta gamma]` relative to the floating base.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootPose {
    pub position: Vector3<f64>,
    pub orientation: EulerZyx,
}

impl FootPose {
    pub fn new(x: f64, y: f64, z: f64, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            position: Vector3::new(x, y, z),
            orientation: EulerZyx::new(alpha, beta, gamma),
        }
    }

    pub fn from_position(xyz: [f64; 3]) -> Self {
        Self::new(xyz[0], xyz[1], xyz[2], 0.0, 0.0, 0.0)
    }

    pub fn from_transform(t: &HomTransform) -> Result<Self, GeometryError> {
        Ok(Self {
            position: t.translation,
            orientation: t.euler()?,
        })
    }

    pub fn to_transform(&self, from: FrameId, to: FrameId) -> HomTransform {
        HomTransform::from_euler(from, to, self.position, self.orientation)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.position.z,
            self.orientation.alpha,
            self.orientation.beta,
            self.orientation.gamma,
        ]
    }

    /// Mirror through the sagittal (x-z) plane: negate y, alpha and gamma.
    pub fn mirrored(&self) -> Self {
        Self::new(
            self.position.x,
            -self.position.y,
            self.position.z,
            -self.orientation.alpha,
            self.orientation.beta,
            -self.orientation.gamma,
        )
    }
}

/// Keeps only the yaw of a `World -> foot` pose: `[Rz(gamma), p]`.
pub fn flatten_to_floating_base(
    support_foot_in_world: &HomTransform,
) -> Result<HomTransform, GeometryError> {
    if support_foot_in_world.from != FrameId::World {
        return Err(GeometryError::FrameMismatch {
            expected: FrameId::World,
            found: support_foot_in_world.from,
        });
    }
    let e = support_foot_in_world.euler()?;
    Ok(HomTransform {
        from: FrameId::World,
        to: FrameId::FloatingBase,
        rotation: rot_z(e.gamma),
        translation: support_foot_in_world.translation,
    })
}

/// Tag poses (all `Camera -> *`) to the pose of `foot_tag`'s foot relative to
/// the floating base built on `support_tag`'s foot.
pub fn foot_pose_in_floating_base(
    world_tag: &HomTransform,
    support_tag: &HomTransform,
    foot_tag: &HomTransform,
) -> Result<FootPose, GeometryError> {
    for tag in [world_tag, support_tag, foot_tag] {
        if tag.from != FrameId::Camera {
            return Err(GeometryError::FrameMismatch {
                expected: FrameId::Camera,
                found: tag.from,
            });
        }
    }
    if Side::from_foot_frame(support_tag.to).is_none() {
        return Err(GeometryError::NotAFoot(support_tag.to));
    }
    if Side::from_foot_frame(foot_tag.to).is_none() {
        return Err(GeometryError::NotAFoot(foot_tag.to));
    }
    let world_from_camera = world_tag.inverse();
    let world_to_support = world_from_camera.compose(support_tag)?;
    let world_to_foot = world_from_camera.compose(foot_tag)?;
    let world_to_base = flatten_to_floating_base(&world_to_support)?;
    let base_to_foot = world_to_base.inverse().compose(&world_to_foot)?;
    FootPose::from_transform(&base_to_foot)
}

/// ZYX angles through nalgebra's own decomposition; used to cross-check ours.
pub fn euler_via_nalgebra(r: &Matrix3<f64>) -> EulerZyx {
    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*r).euler_angles();
    EulerZyx::new(roll, pitch, yaw)
}
