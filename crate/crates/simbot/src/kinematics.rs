//! Rigid-chain kinematics rooted at the planted sole.

use mfgait_core::geometry::Side;
use mfgait_core::joints::{JointId, JointVector};
use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector2, Vector3};

use crate::spec::RobotSpec;

fn joint(side: Side, k: usize) -> JointId {
    let base = match side {
        Side::Left => 0,
        Side::Right => 5,
    };
    JointId::ALL[base + k]
}

fn rx(a: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vector3::x_axis(), a))
}

fn ry(a: f64) -> Isometry3<f64> {
    Isometry3::from_parts(Translation3::identity(), UnitQuaternion::from_axis_angle(&Vector3::y_axis(), a))
}

fn tr(x: f64, y: f64, z: f64) -> Isometry3<f64> {
    Isometry3::translation(x, y, z)
}

struct Leg {
    sole: Isometry3<f64>,
    masses: [(f64, Point3<f64>); 3],
}

/// Pelvis-frame sole pose and link mass centres of one leg:
/// `Ty(+-hip) Rx(hr) Ry(hp) Tz(-thigh) Ry(kp) Tz(-tibia) Ry(ap) Rx(ar) Tz(-foot)`.
fn leg(spec: &RobotSpec, side: Side, q: &JointVector) -> Leg {
    let a = |k| q.angle(joint(side, k));
    let y = match side {
        Side::Left => spec.hip_offset,
        Side::Right => -spec.hip_offset,
    };
    let hip = tr(0.0, y, 0.0) * rx(a(0)) * ry(a(1));
    let knee = hip * tr(0.0, 0.0, -spec.thigh.length) * ry(a(2));
    let ankle = knee * tr(0.0, 0.0, -spec.tibia.length) * ry(a(3)) * rx(a(4));
    let sole = ankle * tr(0.0, 0.0, -spec.foot.length);
    let along = |frame: &Isometry3<f64>, link: &crate::spec::LinkSpec| {
        frame * Point3::new(0.0, 0.0, -link.length * link.com_offset)
    };
    Leg {
        sole,
        masses: [
            (spec.thigh.mass, along(&hip, &spec.thigh)),
            (spec.tibia.mass, along(&knee, &spec.tibia)),
            (spec.foot.mass, along(&ankle, &spec.foot)),
        ],
    }
}

/// Every frame in the world frame, which coincides with the planted sole.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub planted: Side,
    pub pelvis: Isometry3<f64>,
    /// `[left, right]` sole frames.
    pub soles: [Isometry3<f64>; 2],
    /// `(mass kg, centre)` for torso, then thigh, tibia, foot of the left
    /// leg, then of the right leg.
    pub masses: Vec<(f64, Point3<f64>)>,
}

impl Kinematics {
    pub fn sole(&self, side: Side) -> &Isometry3<f64> {
        match side {
            Side::Left => &self.soles[0],
            Side::Right => &self.soles[1],
        }
    }
}

pub fn forward_kinematics(spec: &RobotSpec, q: &JointVector, planted: Side) -> Kinematics {
    let left = leg(spec, Side::Left, q);
    let right = leg(spec, Side::Right, q);
    let planted_sole = match planted {
        Side::Left => left.sole,
        Side::Right => right.sole,
    };
    let pelvis = planted_sole.inverse();
    let torso = Point3::new(0.0, 0.0, spec.torso.length * spec.torso.com_offset);
    let mut masses = vec![(spec.torso.mass, pelvis * torso)];
    for l in [&left, &right] {
        masses.extend(l.masses.iter().map(|(m, p)| (*m, pelvis * p)));
    }
    let mut soles = [pelvis * left.sole, pelvis * right.sole];
    // The planted sole is the world origin by construction; pin it exactly.
    soles[usize::from(planted == Side::Right)] = Isometry3::identity();
    Kinematics {
        planted,
        pelvis,
        soles,
        masses,
    }
}

/// Quasi-static CoP: ground projection of the mass-weighted mean centre.
pub fn com_ground_projection(kin: &Kinematics) -> Vector2<f64> {
    let total: f64 = kin.masses.iter().map(|(m, _)| m).sum();
    let sum: Vector3<f64> = kin.masses.iter().map(|(m, p)| p.coords * *m).sum();
    (sum / total).xy()
}
