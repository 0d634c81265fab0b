//! Transition cost from sensor-derived quantities only.
//!
//! `f = 0.5 * (sum_k w_c[k] (C - C_d)_k^2 + sum_{j=l,r} sum_k w_p[k] (P[j] - P_d[j])_k^2)`

use nalgebra::SVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait_plan::TransitionObjective;
use crate::geometry::{normalize_angle, FootPose, Side};
use crate::sensing::CopReading;

pub const RESIDUAL_LEN: usize = 14;
pub type Residuals = SVector<f64, RESIDUAL_LEN>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("observation is in the {observed:?} floating base but the objective uses {expected:?}")]
    FrameMismatch { expected: Side, observed: Side },
    #[error("invalid weights: {0}")]
    BadWeights(String),
}

/// Per-axis CoP weights and per-component foot pose weights
/// (`[x, y, z, alpha, beta, gamma]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub w_c: [f64; 2],
    pub w_p: [f64; 6],
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), CostError> {
        let all = self.w_c.iter().chain(self.w_p.iter());
        if all.clone().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(CostError::BadWeights("weights must be finite and >= 0".into()));
        }
        if all.clone().all(|w| *w == 0.0) {
            return Err(CostError::BadWeights("at least one weight must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_c: self.w_c.map(|w| w * k),
            w_p: self.w_p.map(|w| w * k),
        }
    }
}

impl Default for CostWeights {
    /// 1 per mm^2 for positions; one degree of tilt costs like one millimetre.
    fn default() -> Self {
        let deg2 = (180.0 / std::f64::consts::PI).powi(2);
        Self {
            w_c: [1.0, 1.0],
            w_p: [1.0, 1.0, 1.0, deg2, deg2, deg2],
        }
    }
}

/// What the sensors report, all in the floating base on `base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub base: Side,
    pub cop: CopReading,
    pub left: FootPose,
    pub right: FootPose,
}

impl Observation {
    pub fn foot(&self, side: Side) -> &FootPose {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

fn pose_diff(p: &FootPose, d: &FootPose) -> [f64; 6] {
    let a = p.as_array();
    let b = d.as_array();
    let mut out = [0.0; 6];
    for k in 0..6 {
        out[k] = if k < 3 { a[k] - b[k] } else { normalize_angle(a[k] - b[k]) };
    }
    out
}

/// `[sqrt(w_c) (C - C_d), sqrt(w_p) (P[l] - P_d[l]), sqrt(w_p) (P[r] - P_d[r])]`,
/// so that the cost is half the squared norm.
pub fn weighted_residuals(
    obs: &Observation,
    obj: &TransitionObjective,
    wts: &CostWeights,
) -> Result<Residuals, CostError> {
    if obs.base != obj.base_side {
        return Err(CostError::FrameMismatch {
            expected: obj.base_side,
            observed: obs.base,
        });
    }
    let mut r = Residuals::zeros();
    let dc = obs.cop.cop - obj.cop_desired;
    r[0] = wts.w_c[0].sqrt() * dc.x;
    r[1] = wts.w_c[1].sqrt() * dc.y;
    for (block, side) in [Side::Left, Side::Right].into_iter().enumerate() {
        let d = pose_diff(obs.foot(side), obj.foot_desired(side));
        for k in 0..6 {
            r[2 + 6 * block + k] = wts.w_p[k].sqrt() * d[k];
        }
    }
    Ok(r)
}

pub fn cost_from_residuals(r: &Residuals) -> f64 {
    0.5 * r.norm_squared()
}

pub fn evaluate_cost(obs: &Observation, obj: &TransitionObjective, wts: &CostWeights) -> Result<f64, CostError> {
    weighted_residuals(obs, obj, wts).map(|r| cost_from_residuals(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait_plan::{build_cycle, GaitParams};
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn objective() -> TransitionObjective {
        build_cycle(GaitParams::default(), true, None).unwrap().objectives[0].clone()
    }

    fn at_target(obj: &TransitionObjective) -> Observation {
        Observation {
            base: obj.base_side,
            cop: CopReading {
                cop: obj.cop_desired,
                grf: 52.0,
            },
            left: obj.foot_left,
            right: obj.foot_right,
        }
    }

    fn unit() -> CostWeights {
        CostWeights {
            w_c: [1.0; 2],
            w_p: [1.0; 6],
        }
    }

    #[test]
    fn zero_at_objective() {
        let o = objective();
        assert_eq!(evaluate_cost(&at_target(&o), &o, &CostWeights::default()).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_cop_term() {
        let o = objective();
        let mut obs = at_target(&o);
        obs.cop.cop += Vector2::new(3.0, 4.0);
        assert_eq!(evaluate_cost(&obs, &o, &unit()).unwrap(), 12.5);
        let no_cop = CostWeights { w_c: [0.0; 2], ..unit() };
        assert_eq!(evaluate_cost(&obs, &o, &no_cop).unwrap(), 0.0);
    }

    #[test]
    fn one_degree_costs_like_one_millimetre() {
        let o = objective();
        let mut tilted = at_target(&o);
        tilted.left.orientation.beta = 1f64.to_radians();
        let mut shifted = at_target(&o);
        shifted.left.position.z += 1.0;
        let w = CostWeights::default();
        let a = evaluate_cost(&tilted, &o, &w).unwrap();
        let b = evaluate_cost(&shifted, &o, &w).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn frame_mismatch_is_rejected() {
        let o = objective();
        let mut obs = at_target(&o);
        obs.base = Side::Left;
        assert!(matches!(evaluate_cost(&obs, &o, &unit()), Err(CostError::FrameMismatch { .. })));
    }

    #[test]
    fn weight_validation() {
        assert!(CostWeights::default().validate().is_ok());
        assert!(CostWeights { w_c: [0.0; 2], w_p: [0.0; 6] }.validate().is_err());
        assert!(CostWeights { w_c: [-1.0, 1.0], w_p: [1.0; 6] }.validate().is_err());
    }

    fn perturbed() -> impl Strategy<Value = (Vec<f64>, [f64; 2], [f64; 6])> {
        (
            prop::collection::vec(-30.0..30.0f64, 14),
            prop::array::uniform2(0.0..5.0f64),
            prop::array::uniform6(0.0..5.0f64),
        )
    }

    fn observed(o: &TransitionObjective, d: &[f64]) -> Observation {
        let mut obs = at_target(o);
        obs.cop.cop += Vector2::new(d[0], d[1]);
        let l = obs.left.as_array();
        let r = obs.right.as_array();
        obs.left = FootPose::new(l[0] + d[2], l[1] + d[3], l[2] + d[4], d[5] * 0.01, d[6] * 0.01, d[7] * 0.01);
        obs.right = FootPose::new(r[0] + d[8], r[1] + d[9], r[2] + d[10], d[11] * 0.01, d[12] * 0.01, d[13] * 0.01);
        obs
    }

    proptest! {
        #[test]
        fn nonnegative_and_linear_in_weights((d, wc, wp) in perturbed()) {
            let o = objective();
            let w = CostWeights { w_c: wc, w_p: wp };
            let obs = observed(&o, &d);
            let f = evaluate_cost(&obs, &o, &w).unwrap();
            prop_assert!(f >= 0.0);
            let f2 = evaluate_cost(&obs, &o, &w.scaled(2.0)).unwrap();
            prop_assert!((f2 - 2.0 * f).abs() <= 1e-9 * f.max(1.0));
        }

        #[test]
        fn positive_when_any_residual_nonzero((d, _, _) in perturbed()) {
            prop_assume!(d.iter().any(|x| x.abs() > 1e-6));
            let o = objective();
            let f = evaluate_cost(&observed(&o, &d), &o, &unit()).unwrap();
            prop_assert!(f > 0.0);
        }

        #[test]
        fn swapping_feet_keeps_cost((d, wc, wp) in perturbed()) {
            let o = objective();
            let w = CostWeights { w_c: wc, w_p: wp };
            let obs = observed(&o, &d);
            let f = evaluate_cost(&obs, &o, &w).unwrap();
            let mut so = o.clone();
            std::mem::swap(&mut so.foot_left, &mut so.foot_right);
            let mut sobs = obs;
            std::mem::swap(&mut sobs.left, &mut sobs.right);
            let g = evaluate_cost(&sobs, &so, &w).unwrap();
            prop_assert!((f - g).abs() <= 1e-12 * f.max(1.0));
        }
    }
}
