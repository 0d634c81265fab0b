use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::world::SensorWorld;
use super::OptimizerError;
use crate::cost::{cost_from_residuals, weighted_residuals, CostWeights, Observation, Residuals, RESIDUAL_LEN};
use crate::gait_plan::TransitionObjective;
use crate::joints::{JointId, JointLimits, JointVector};

/// One measured point: command, read the sensors, score against the objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub obs: Observation,
    pub residuals: Residuals,
    pub cost: f64,
}

pub(crate) fn weights_for<'a>(obj: &'a TransitionObjective, wts: &'a CostWeights) -> &'a CostWeights {
    obj.weights.as_ref().unwrap_or(wts)
}

pub fn measure<W: SensorWorld + ?Sized>(
    world: &mut W,
    q: &JointVector,
    obj: &TransitionObjective,
    wts: &CostWeights,
) -> Result<Measurement, OptimizerError> {
    world.set_joints(q)?;
    let obs = world.observe(obj.base_side)?;
    let residuals = weighted_residuals(&obs, obj, weights_for(obj, wts))?;
    Ok(Measurement {
        obs,
        cost: cost_from_residuals(&residuals),
        residuals,
    })
}

/// The two probe points used for one joint. They sit at `q -/+ delta`
/// unless a joint limit cut one side short.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub joint: JointId,
    pub minus: f64,
    pub plus: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub joints: Vec<JointId>,
    pub grad: DVector<f64>,
    /// Weighted residual Jacobian, built from the same probes.
    pub jacobian: DMatrix<f64>,
    pub probes: Vec<Probe>,
    pub searches: usize,
}

impl GradientEstimate {
    pub fn as_joint_vector(&self) -> JointVector {
        self.joints.iter().copied().zip(self.grad.iter().copied()).collect()
    }
}

/// Central-difference gradient over the objective's active joints.
///
/// Costs exactly `2 * |active|` observations, then re-commands `q`.
pub fn estimate_gradient<W: SensorWorld + ?Sized>(
    world: &mut W,
    q: &JointVector,
    obj: &TransitionObjective,
    wts: &CostWeights,
    delta: f64,
    limits: &JointLimits,
) -> Result<GradientEstimate, OptimizerError> {
    let n = obj.active_joints.len();
    let mut grad = DVector::zeros(n);
    let mut jacobian = DMatrix::zeros(RESIDUAL_LEN, n);
    let mut probes = Vec::with_capacity(n);
    let mut searches = 0;
    for (k, &j) in obj.active_joints.iter().enumerate() {
        let range = limits.range(j);
        let centre = q.angle(j);
        let plus = (centre + delta).min(range.upper);
        let minus = (centre - delta).max(range.lower);
        if !(plus > minus) {
            return Err(OptimizerError::DegenerateProbe(j));
        }
        let hi = measure(world, &q.clone().with(j, plus), obj, wts)?;
        let lo = measure(world, &q.clone().with(j, minus), obj, wts)?;
        searches += 2;
        let h = plus - minus;
        grad[k] = (hi.cost - lo.cost) / h;
        jacobian.set_column(k, &((hi.residuals - lo.residuals) / h));
        probes.push(Probe {
            joint: j,
            minus,
            plus,
            clipped: plus < centre + delta || minus > centre - delta,
        });
    }
    world.set_joints(q)?;
    Ok(GradientEstimate {
        joints: obj.active_joints.clone(),
        grad,
        jacobian,
        probes,
        searches,
    })
}
