use nalgebra::Vector2;
use thiserror::Error;

use crate::cost::Observation;
use crate::geometry::{GeometryError, Side};
use crate::joints::JointVector;
use crate::sensing::{SensingError, CELL_COUNT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("robot falls: {0}")]
    Falls(String),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("joint command rejected: {0}")]
    BadCommand(String),
}

/// Everything the optimizer may know about a robot: it can command joint
/// angles and read back sensor-derived quantities. No kinematic or inertial
/// data passes through here.
pub trait SensorWorld {
    /// The last commanded configuration.
    fn joints(&self) -> JointVector;

    /// Commands `q`. Joints missing from `q` keep their current angle.
    fn set_joints(&mut self, q: &JointVector) -> Result<(), WorldError>;

    /// CoP and foot poses in the floating base attached to `base`.
    fn observe(&mut self, base: Side) -> Result<Observation, WorldError>;
}

/// Raw voltages and tag-derived cell positions, for calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawReading {
    pub volts: [f64; CELL_COUNT],
    pub positions: [Vector2<f64>; CELL_COUNT],
}

pub trait RawSensorWorld: SensorWorld {
    fn raw(&mut self, base: Side) -> Result<RawReading, WorldError>;
}

impl<W: SensorWorld + ?Sized> SensorWorld for &mut W {
    fn joints(&self) -> JointVector {
        (**self).joints()
    }

    fn set_joints(&mut self, q: &JointVector) -> Result<(), WorldError> {
        (**self).set_joints(q)
    }

    fn observe(&mut self, base: Side) -> Result<Observation, WorldError> {
        (**self).observe(base)
    }
}
