//! The per-cycle sequence of CoP and foot objectives, and left/right mirroring.
//!
//! Postures a..e of one half cycle:
//!
//! | row | C_d        | P_d[l]      | P_d[r]      | joints | base  |
//! |-----|------------|-------------|-------------|--------|-------|
//! | 1   | [0, 0]     | [0, W, 0]   | 0           | roll   | right |
//! | 2   | [0, 0]     | [0, W, h]   | 0           | pitch  | right |
//! | 3   | [s', 0]    | [s, W, 0]   | 0           | pitch  | right |
//! | 4   | [s', w]    | [s, W, 0]   | 0           | roll   | right |
//! | 5   | [-s', 0]   | 0           | [-s, -W, 0] | roll   | left  |
//!
//! with `s' = s/2` and `W = 2w`. Row 5 is written in the floating base of the
//! left foot. Skipping the lift replaces rows 2 and 3 with one objective that
//! slides the left foot straight to `[s, W, 0]`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostWeights;
use crate::geometry::{FootPose, Side};
use crate::joints::{JointId, JointVector};
use crate::sensing::{sensor_positions_in_base, support_polygon, ShoeLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaitError {
    #[error("degenerate step: step length {0} mm must be positive")]
    DegenerateStep(f64),
    #[error("invalid gait parameters: {0}")]
    InvalidParams(String),
    #[error("objective {index}: desired CoP ({x}, {y}) lies outside the support polygon")]
    Infeasible { index: u8, x: f64, y: f64 },
    #[error("trajectory format error: {0}")]
    Format(String),
}

/// Step length `s`, half stance `w` (feet `W = 2w` apart) and lift height `h`,
/// all in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub s: f64,
    pub w: f64,
    pub h: f64,
}

impl GaitParams {
    pub fn cop_forward(&self) -> f64 {
        self.s / 2.0
    }

    pub fn stance_width(&self) -> f64 {
        2.0 * self.w
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        if !(self.s > 0.0) {
            return Err(GaitError::DegenerateStep(self.s));
        }
        if !(self.w > 0.0) {
            return Err(GaitError::InvalidParams(format!("half stance w = {} must be positive", self.w)));
        }
        if !(self.h >= 0.0) {
            return Err(GaitError::InvalidParams(format!("lift height h = {} must be >= 0", self.h)));
        }
        Ok(())
    }
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            s: 40.0,
            w: 50.0,
            h: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    Double,
    SingleRight,
    SingleLeft,
}

impl SupportMode {
    pub fn mirrored(self) -> Self {
        match self {
            SupportMode::Double => SupportMode::Double,
            SupportMode::SingleRight => SupportMode::SingleLeft,
            SupportMode::SingleLeft => SupportMode::SingleRight,
        }
    }

    /// `[left, right]` shoes expected on the ground.
    pub fn contacts(self) -> [bool; 2] {
        match self {
            SupportMode::Double => [true, true],
            SupportMode::SingleRight => [false, true],
            SupportMode::SingleLeft => [true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionObjective {
    /// Table row the transition starts from (1..5).
    pub index: u8,
    /// Rows 2 and 3 collapsed into one objective.
    #[serde(default)]
    pub merged: bool,
    #[serde(default)]
    pub mirrored: bool,
    pub cop_desired: Vector2<f64>,
    pub foot_left: FootPose,
    pub foot_right: FootPose,
    pub active_joints: Vec<JointId>,
    pub support: SupportMode,
    pub base_side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<CostWeights>,
}

impl TransitionObjective {
    pub fn foot_desired(&self, side: Side) -> &FootPose {
        match side {
            Side::Left => &self.foot_left,
            Side::Right => &self.foot_right,
        }
    }

    pub fn label(&self) -> String {
        let base = if self.merged {
            format!("{}+{}", self.index, self.index + 1)
        } else {
            self.index.to_string()
        };
        if self.mirrored {
            format!("{base}m")
        } else {
            base
        }
    }

    /// Polygon the desired CoP must stay in, with both shoes at their desired
    /// poses.
    pub fn support_region(&self, layout: &ShoeLayout) -> crate::sensing::ConvexPolygon {
        let other = self.foot_desired(self.base_side.other());
        let pos = sensor_positions_in_base(layout, self.base_side, other);
        support_polygon(&pos, self.support.contacts())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitCycle {
    pub params: GaitParams,
    pub skip_lift: bool,
    pub objectives: Vec<TransitionObjective>,
}

impl GaitCycle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cycle serializes")
    }
}

fn roll() -> Vec<JointId> {
    JointId::ROLL.to_vec()
}

fn pitch() -> Vec<JointId> {
    JointId::PITCH.to_vec()
}

/// The standard transition cycle with the default shoe layout. `cop_centering` is the lateral
/// shift of the merged objective's CoP (default `w`).
pub fn build_cycle(
    params: GaitParams,
    skip_lift: bool,
    cop_centering: Option<f64>,
) -> Result<GaitCycle, GaitError> {
    build_cycle_with_layout(params, skip_lift, cop_centering, &ShoeLayout::default())
}

pub fn build_cycle_with_layout(
    params: GaitParams,
    skip_lift: bool,
    cop_centering: Option<f64>,
    layout: &ShoeLayout,
) -> Result<GaitCycle, GaitError> {
    params.validate()?;
    let (s, sp, w, big_w, h) = (params.s, params.cop_forward(), params.w, params.stance_width(), params.h);
    let zero = FootPose::default();
    let obj = |index, cop: [f64; 2], left: FootPose, right: FootPose, joints, support, base| TransitionObjective {
        index,
        merged: false,
        mirrored: false,
        cop_desired: Vector2::from(cop),
        foot_left: left,
        foot_right: right,
        active_joints: joints,
        support,
        base_side: base,
        weights: None,
    };
    let stepped = FootPose::from_position([s, big_w, 0.0]);

    let mut objectives = vec![obj(
        1,
        [0.0, 0.0],
        FootPose::from_position([0.0, big_w, 0.0]),
        zero,
        roll(),
        SupportMode::Double,
        Side::Right,
    )];
    if skip_lift {
        let centering = cop_centering.unwrap_or(w);
        let mut joints = roll();
        joints.extend(pitch());
        joints.sort();
        let mut merged = obj(2, [sp, centering], stepped, zero, joints, SupportMode::Double, Side::Right);
        merged.merged = true;
        objectives.push(merged);
    } else {
        objectives.push(obj(
            2,
            [0.0, 0.0],
            FootPose::from_position([0.0, big_w, h]),
            zero,
            pitch(),
            SupportMode::SingleRight,
            Side::Right,
        ));
        objectives.push(obj(3, [sp, 0.0], stepped, zero, pitch(), SupportMode::SingleRight, Side::Right));
    }
    objectives.push(obj(4, [sp, w], stepped, zero, roll(), SupportMode::Double, Side::Right));
    objectives.push(obj(
        5,
        [-sp, 0.0],
        zero,
        FootPose::from_position([-s, -big_w, 0.0]),
        roll(),
        SupportMode::Double,
        Side::Left,
    ));

    for o in &objectives {
        if !o.support_region(layout).contains(&o.cop_desired) {
            return Err(GaitError::Infeasible {
                index: o.index,
                x: o.cop_desired.x,
                y: o.cop_desired.y,
            });
        }
    }
    Ok(GaitCycle {
        params,
        skip_lift,
        objectives,
    })
}

/// Left/right mirror of an objective through the sagittal plane.
pub fn mirror_transition(obj: &TransitionObjective) -> TransitionObjective {
    let mut joints: Vec<JointId> = obj.active_joints.iter().map(|j| j.mirror()).collect();
    joints.sort();
    TransitionObjective {
        index: obj.index,
        merged: obj.merged,
        mirrored: !obj.mirrored,
        cop_desired: Vector2::new(obj.cop_desired.x, -obj.cop_desired.y),
        foot_left: obj.foot_right.mirrored(),
        foot_right: obj.foot_left.mirrored(),
        active_joints: joints,
        support: obj.support.mirrored(),
        base_side: obj.base_side.other(),
        weights: obj.weights,
    }
}

/// Mirrors one joint configuration: channels swap legs, roll angles flip sign.
pub fn mirror_joints(q: &JointVector) -> JointVector {
    q.iter()
        .map(|(j, v)| (j.mirror(), if j.is_roll() { -v } else { v }))
        .collect()
}

/// Stored joint trajectory: fixed channel list, one row of angles per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub channels: Vec<JointId>,
    pub frames: Vec<Vec<f64>>,
}

impl JointTrajectory {
    pub fn from_vectors(qs: &[JointVector]) -> Result<Self, GaitError> {
        let channels: Vec<JointId> = qs.first().map(|q| q.joints().collect()).unwrap_or_default();
        let mut frames = Vec::with_capacity(qs.len());
        for (k, q) in qs.iter().enumerate() {
            if !q.same_joints(&channels) {
                return Err(GaitError::Format(format!("frame {k} carries a different joint set")));
            }
            frames.push(channels.iter().map(|&j| q.angle(j)).collect());
        }
        Ok(Self { channels, frames })
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        let mut seen = self.channels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.channels.len() {
            return Err(GaitError::Format("duplicate channel".into()));
        }
        for (k, f) in self.frames.iter().enumerate() {
            if f.len() != self.channels.len() {
                return Err(GaitError::Format(format!(
                    "frame {k} has {} values for {} channels",
                    f.len(),
                    self.channels.len()
                )));
            }
        }
        Ok(())
    }

    pub fn to_vectors(&self) -> Result<Vec<JointVector>, GaitError> {
        self.validate()?;
        Ok(self
            .frames
            .iter()
            .map(|f| self.channels.iter().copied().zip(f.iter().copied()).collect())
            .collect())
    }
}

pub fn mirror_joint_trajectory(traj: &JointTrajectory) -> Result<JointTrajectory, GaitError> {
    let qs = traj.to_vectors()?;
    let mirrored: Vec<JointVector> = qs.iter().map(mirror_joints).collect();
    if mirrored.is_empty() {
        let mut channels: Vec<JointId> = traj.channels.iter().map(|j| j.mirror()).collect();
        channels.sort();
        return Ok(JointTrajectory {
            channels,
            frames: Vec::new(),
        });
    }
    JointTrajectory::from_vectors(&mirrored)
}
