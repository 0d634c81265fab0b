//! Quasi-static kinematic biped standing on two instrumented shoes.
//!
//! Everything inside this crate is hidden from the optimizer: it only sees
//! the [`SensorWorld`](mfgait_core::optimizer::SensorWorld) implementation on
//! [`SimWorld`].

// `!(x > 0.0)` style checks are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use mfgait_core::geometry::GeometryError;
use mfgait_core::optimizer::WorldError;
use mfgait_core::sensing::SensingError;
use thiserror::Error;

pub mod contact;
pub mod kinematics;
pub mod spec;
pub mod world;

pub use contact::{distribute_forces, ContactState};
pub use kinematics::{com_ground_projection, forward_kinematics, Kinematics};
pub use spec::{LinkSpec, NoiseSpec, RobotSpec};
pub use world::{corrupted_params, SimState, SimWorld};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("bad robot spec: {0}")]
    BadSpec(String),
    #[error("robot falls: {0}")]
    Falls(String),
    #[error("joint command rejected: {0}")]
    BadCommand(String),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<SimError> for WorldError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Falls(m) => WorldError::Falls(m),
            SimError::Sensing(s) => WorldError::Sensing(s),
            SimError::Geometry(g) => WorldError::Geometry(g),
            SimError::BadCommand(m) => WorldError::BadCommand(m),
            SimError::BadSpec(m) => WorldError::BadCommand(format!("bad robot spec: {m}")),
        }
    }
}
