//! Model-free quasi-static gait generation and load-cell self-calibration.
//!
//! The optimizer only ever talks to a robot through [`optimizer::SensorWorld`]:
//! it commands joint angles and reads back a CoP and two foot poses. Nothing
//! in this crate knows link lengths or masses.

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cost;
pub mod gait_plan;
pub mod geometry;
pub mod joints;
pub mod optimizer;
pub mod sensing;

pub use cost::{evaluate_cost, CostWeights, Observation};
pub use gait_plan::{build_cycle, GaitCycle, GaitParams, SupportMode, TransitionObjective};
pub use geometry::{EulerZyx, FootPose, FrameId, HomTransform, Side};
pub use joints::{JointId, JointLimits, JointVector};
pub use sensing::{CellParams, CopReading, ShoeLayout};
