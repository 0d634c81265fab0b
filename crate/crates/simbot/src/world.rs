use mfgait_core::cost::Observation;
use mfgait_core::geometry::{foot_pose_in_floating_base, EulerZyx, FootPose, FrameId, HomTransform, Side};
use mfgait_core::joints::{JointLimits, JointVector};
use mfgait_core::optimizer::{RawReading, RawSensorWorld, SensorWorld, WorldError};
use mfgait_core::sensing::{cop_from_forces, sensor_positions_in_base, CellParams, ShoeLayout, CELL_COUNT, DEFAULT_MIN_TOTAL};
use nalgebra::{Isometry3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::contact::{distribute_forces, ContactState};
use crate::kinematics::{com_ground_projection, forward_kinematics, Kinematics};
use crate::spec::RobotSpec;
use crate::SimError;

/// Ground truth behind one reading. Test oracles only.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub kin: Kinematics,
    pub contacts: ContactState,
    /// CoM ground projection in the planted-sole frame.
    pub cop: Vector2<f64>,
    pub grf: f64,
    pub positions: [Vector2<f64>; CELL_COUNT],
    pub forces: [f64; CELL_COUNT],
}

fn to_hom(iso: &Isometry3<f64>, to: FrameId) -> HomTransform {
    HomTransform {
        from: FrameId::World,
        to,
        rotation: *iso.rotation.to_rotation_matrix().matrix(),
        translation: iso.translation.vector,
    }
}

/// The simulated bench robot. It is deterministic for a given spec, seed and
/// command sequence.
#[derive(Debug, Clone)]
pub struct SimWorld {
    spec: RobotSpec,
    layout: ShoeLayout,
    truth: [CellParams; CELL_COUNT],
    camera: HomTransform,
    q: JointVector,
    rng: ChaCha8Rng,
}

impl SimWorld {
    pub fn new(spec: RobotSpec) -> Result<Self, SimError> {
        spec.validate()?;
        Ok(Self {
            layout: spec.layout()?,
            truth: spec.truth()?,
            camera: spec.camera_pose()?,
            q: JointVector::home(),
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            spec,
        })
    }

    pub fn default_robot() -> Self {
        Self::new(RobotSpec::default()).expect("default spec is valid")
    }

    pub fn spec(&self) -> &RobotSpec {
        &self.spec
    }

    pub fn limits(&self) -> &JointLimits {
        &self.spec.joint_limits
    }

    /// What the cells really do, whatever the robot believes.
    pub fn with_truth(mut self, truth: [CellParams; CELL_COUNT]) -> Self {
        self.truth = truth;
        self
    }

    pub fn truth(&self) -> &[CellParams; CELL_COUNT] {
        &self.truth
    }

    /// The parameters used to turn voltages into forces in `observe`.
    pub fn installed(&self) -> [CellParams; CELL_COUNT] {
        self.layout.params()
    }

    pub fn install(&mut self, params: &[CellParams; CELL_COUNT]) {
        self.layout = self.layout.clone().with_params(params);
    }

    /// Full physical state with the world rooted at the `base` sole.
    pub fn state(&self, base: Side) -> Result<SimState, SimError> {
        let kin = forward_kinematics(&self.spec, &self.q, base);
        let other = kin.sole(base.other());
        let touching = other.translation.vector.z < self.spec.contact_clearance;
        let contacts = match base {
            Side::Left => ContactState { left: true, right: touching },
            Side::Right => ContactState { left: touching, right: true },
        };
        let cop = com_ground_projection(&kin);
        let grf = self.spec.total_mass() * self.spec.gravity;
        let other_pose = FootPose::from_transform(&to_hom(other, base.other().foot_frame()))?;
        let positions = sensor_positions_in_base(&self.layout, base, &other_pose);
        let forces = distribute_forces(&cop, grf, contacts, &positions)?;
        Ok(SimState {
            kin,
            contacts,
            cop,
            grf,
            positions,
            forces,
        })
    }

    fn tag(&mut self, world_to: &HomTransform) -> HomTransform {
        let n = self.spec.noise;
        let mut t = self.camera.inverse().compose(world_to).expect("camera chain");
        if n.tag_mm > 0.0 || n.tag_rad > 0.0 {
            let mm = Normal::new(0.0, n.tag_mm).expect("sigma >= 0");
            let rad = Normal::new(0.0, n.tag_rad).expect("sigma >= 0");
            let e = t.euler().expect("rotation");
            let d = Vector3::from_fn(|_, _| mm.sample(&mut self.rng));
            let r = EulerZyx::new(
                e.alpha + rad.sample(&mut self.rng),
                e.beta + rad.sample(&mut self.rng),
                e.gamma + rad.sample(&mut self.rng),
            );
            t = HomTransform::from_euler(t.from, t.to, t.translation + d, r);
        }
        t
    }

    /// Camera readings of the world tag and both foot tags.
    fn tags(&mut self, kin: &Kinematics) -> [HomTransform; 3] {
        let world = self.tag(&HomTransform::identity(FrameId::World));
        let l = self.tag(&to_hom(kin.sole(Side::Left), FrameId::LeftFoot));
        let r = self.tag(&to_hom(kin.sole(Side::Right), FrameId::RightFoot));
        [world, l, r]
    }

    fn read(&mut self, base: Side) -> Result<(RawReading, FootPose, FootPose), SimError> {
        let st = self.state(base)?;
        let [world, l, r] = self.tags(&st.kin);
        let support = if base == Side::Left { &l } else { &r };
        let left = foot_pose_in_floating_base(&world, support, &l)?;
        let right = foot_pose_in_floating_base(&world, support, &r)?;
        let other = if base == Side::Left { &right } else { &left };
        let positions = sensor_positions_in_base(&self.layout, base, other);
        let sigma = self.spec.noise.volts;
        let mut volts = [0.0; CELL_COUNT];
        for (i, f) in st.forces.iter().enumerate() {
            volts[i] = self.truth[i].voltage(*f);
            if sigma > 0.0 {
                volts[i] += Normal::new(0.0, sigma).expect("sigma >= 0").sample(&mut self.rng);
            }
        }
        Ok((RawReading { volts, positions }, left, right))
    }
}

impl SensorWorld for SimWorld {
    fn joints(&self) -> JointVector {
        self.q.clone()
    }

    fn set_joints(&mut self, q: &JointVector) -> Result<(), WorldError> {
        let mut next = self.q.clone();
        for (j, a) in q.iter() {
            if !a.is_finite() || !self.spec.joint_limits.range(j).contains(a) {
                return Err(SimError::BadCommand(format!("{j} = {a} is outside its limits")).into());
            }
            next.set(j, a);
        }
        self.q = next;
        Ok(())
    }

    fn observe(&mut self, base: Side) -> Result<Observation, WorldError> {
        let (raw, left, right) = self.read(base)?;
        let forces = self.layout.forces_from_voltages(&raw.volts);
        let pairs: Vec<_> = forces.into_iter().zip(raw.positions).collect();
        let cop = cop_from_forces(&pairs, DEFAULT_MIN_TOTAL)?;
        Ok(Observation { base, cop, left, right })
    }
}

impl RawSensorWorld for SimWorld {
    fn raw(&mut self, base: Side) -> Result<RawReading, WorldError> {
        Ok(self.read(base)?.0)
    }
}

/// Each gain scaled by U(0.8, 1.2) and each offset shifted by U(-0.5, 0.5) N.
pub fn corrupted_params(base: &[CellParams; CELL_COUNT], seed: u64) -> [CellParams; CELL_COUNT] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    base.map(|p| CellParams {
        a: p.a * rng.random_range(0.8..1.2),
        b: p.b + rng.random_range(-0.5..0.5),
    })
}
