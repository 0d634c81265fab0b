//! Robot description. All numbers here are invented test parameters at NAO
//! scale; none of them reach the optimizer.

use mfgait_core::geometry::{FrameId, HomTransform, PoseRecord};
use mfgait_core::joints::JointLimits;
use mfgait_core::sensing::{CellParams, SensorConfig, ShoeLayout, CELL_COUNT};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    /// mm
    pub length: f64,
    /// kg
    pub mass: f64,
    /// Mass centre as a fraction of the length from the proximal joint.
    pub com_offset: f64,
}

impl LinkSpec {
    pub fn new(name: &str, length: f64, mass: f64, com_offset: f64) -> Self {
        Self {
            name: name.to_string(),
            length,
            mass,
            com_offset,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.length > 0.0) || !(self.mass >= 0.0) || !(0.0..=1.0).contains(&self.com_offset) {
            return Err(SimError::BadSpec(format!(
                "link {}: need length > 0, mass >= 0, offset in [0, 1]",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Per-cell voltage noise (V).
    pub volts: f64,
    /// Tag translation noise (mm).
    pub tag_mm: f64,
    /// Tag rotation noise (rad, per ZYX angle).
    pub tag_rad: f64,
}

impl NoiseSpec {
    pub fn is_off(&self) -> bool {
        self.volts == 0.0 && self.tag_mm == 0.0 && self.tag_rad == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotSpec {
    /// Lateral distance from the pelvis centre to each hip (mm).
    pub hip_offset: f64,
    /// Upward from the hip line.
    pub torso: LinkSpec,
    pub thigh: LinkSpec,
    pub tibia: LinkSpec,
    /// Ankle to sole.
    pub foot: LinkSpec,
    /// m/s^2
    pub gravity: f64,
    /// Layout and the parameters the robot believes its cells have.
    pub sensors: SensorConfig,
    /// What the cells actually do; the installed parameters when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_params: Option<Vec<CellParams>>,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// A shoe whose sole is lower than this (mm) touches the bench.
    pub contact_clearance: f64,
    pub joint_limits: JointLimits,
    /// `World -> Camera`.
    pub camera: PoseRecord,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            hip_offset: 50.0,
            torso: LinkSpec::new("torso", 260.0, 3.3, 0.5),
            thigh: LinkSpec::new("thigh", 100.0, 0.45, 0.5),
            tibia: LinkSpec::new("tibia", 102.9, 0.35, 0.5),
            foot: LinkSpec::new("foot", 45.19, 0.2, 0.5),
            gravity: 9.81,
            sensors: SensorConfig::from(&ShoeLayout::default()),
            true_params: None,
            noise: NoiseSpec::default(),
            seed: 0,
            contact_clearance: 5.0,
            joint_limits: JointLimits::nao(),
            camera: PoseRecord {
                frame_from: FrameId::World,
                frame_to: FrameId::Camera,
                xyz_mm: [650.0, -420.0, 900.0],
                rpy_rad: [-2.3, 0.35, 2.6],
            },
        }
    }
}

impl RobotSpec {
    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let spec: RobotSpec = serde_json::from_str(s).map_err(|e| SimError::BadSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass + 2.0 * (self.thigh.mass + self.tibia.mass + self.foot.mass)
    }

    pub fn layout(&self) -> Result<ShoeLayout, SimError> {
        ShoeLayout::try_from(self.sensors.clone()).map_err(|e| SimError::BadSpec(e.to_string()))
    }

    pub fn installed_params(&self) -> Result<[CellParams; CELL_COUNT], SimError> {
        Ok(self.layout()?.params())
    }

    pub fn truth(&self) -> Result<[CellParams; CELL_COUNT], SimError> {
        match &self.true_params {
            None => self.installed_params(),
            Some(v) => <[CellParams; CELL_COUNT]>::try_from(v.as_slice())
                .map_err(|_| SimError::BadSpec(format!("true_params needs {CELL_COUNT} entries, got {}", v.len()))),
        }
    }

    pub fn camera_pose(&self) -> Result<HomTransform, SimError> {
        let t = HomTransform::try_from(self.camera.clone())?;
        if t.from != FrameId::World || t.to != FrameId::Camera {
            return Err(SimError::BadSpec("camera pose must be World -> Camera".into()));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for l in [&self.torso, &self.thigh, &self.tibia, &self.foot] {
            l.validate()?;
        }
        if !(self.hip_offset > 0.0) {
            return Err(SimError::BadSpec("hip_offset must be positive".into()));
        }
        if !(self.total_mass() > 0.0) || !(self.gravity > 0.0) {
            return Err(SimError::BadSpec("total mass and gravity must be positive".into()));
        }
        if !(self.contact_clearance >= 0.0) {
            return Err(SimError::BadSpec("contact_clearance must be >= 0".into()));
        }
        let n = self.noise;
        if [n.volts, n.tag_mm, n.tag_rad].iter().any(|s| !(*s >= 0.0)) {
            return Err(SimError::BadSpec("noise sigmas must be >= 0".into()));
        }
        for p in self.truth()?.iter().chain(self.installed_params()?.iter()) {
            if p.a == 0.0 {
                return Err(SimError::BadSpec("cell gain must be non-zero".into()));
            }
        }
        self.camera_pose()?;
        Ok(())
    }
}
