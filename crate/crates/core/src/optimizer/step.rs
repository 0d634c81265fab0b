use nalgebra::{DMatrix, DVector};

use super::gradient::{measure, GradientEstimate, Measurement};
use super::world::SensorWorld;
use super::{OptimizerConfig, OptimizerError, Preconditioner};
use crate::cost::CostWeights;
use crate::gait_plan::TransitionObjective;
use crate::joints::{JointId, JointVector};

pub const MAX_BACKTRACKS: usize = 20;

/// Descent direction `d`; the update is `q - eta * d`.
pub fn direction(est: &GradientEstimate, pre: Preconditioner) -> DVector<f64> {
    match pre {
        Preconditioner::None => est.grad.clone(),
        Preconditioner::GaussNewton { damping } => {
            let n = est.grad.len();
            let h = est.jacobian.transpose() * &est.jacobian;
            let mu = damping * h.trace() / n.max(1) as f64;
            if !(mu > 0.0) {
                return est.grad.clone();
            }
            (h + DMatrix::identity(n, n) * mu)
                .cholesky()
                .map(|c| c.solve(&est.grad))
                .unwrap_or_else(|| est.grad.clone())
        }
    }
}

/// Scale on `eta * d` that keeps every joint move within `max_step`.
fn cap_scale(step: &DVector<f64>, max_step: f64) -> f64 {
    let biggest = step.amax();
    if biggest > max_step {
        max_step / biggest
    } else {
        1.0
    }
}

/// `q - eta * d` on `joints`, shrunk to `max_step` and clamped to limits.
/// Returns the new configuration and the step size actually applied.
pub fn gd_step(
    q: &JointVector,
    joints: &[JointId],
    d: &DVector<f64>,
    eta: f64,
    config: &OptimizerConfig,
) -> (JointVector, f64) {
    let step = d * eta;
    let eta_used = eta * cap_scale(&step, config.max_step);
    let mut next = q.clone();
    for (k, &j) in joints.iter().enumerate() {
        next.set(j, config.limits.clamp(j, q.angle(j) - eta_used * d[k]));
    }
    (next, eta_used)
}

pub struct Accepted {
    pub q: JointVector,
    pub at: Measurement,
    pub eta: f64,
    pub trials: usize,
}

/// Backtracking from `eta_max`: accept the first `eta = eta_max * beta^k` with
/// `f(q - eta d) <= f(q) - c * eta * g.d`.
#[allow(clippy::too_many_arguments)]
pub fn armijo_step<W: SensorWorld + ?Sized>(
    world: &mut W,
    q: &JointVector,
    f0: f64,
    est: &GradientEstimate,
    d: &DVector<f64>,
    obj: &TransitionObjective,
    wts: &CostWeights,
    config: &OptimizerConfig,
    (c, beta, eta_max): (f64, f64, f64),
) -> Result<Accepted, OptimizerError> {
    let slope = est.grad.dot(d);
    let mut eta = eta_max;
    for trial in 1..=MAX_BACKTRACKS + 1 {
        let (next, eta_used) = gd_step(q, &est.joints, d, eta, config);
        let at = measure(world, &next, obj, wts)?;
        if at.cost <= f0 - c * eta_used * slope {
            return Ok(Accepted {
                q: next,
                at,
                eta: eta_used,
                trials: trial,
            });
        }
        eta *= beta;
    }
    world.set_joints(q)?;
    Err(OptimizerError::Stall {
        backtracks: MAX_BACKTRACKS,
    })
}
