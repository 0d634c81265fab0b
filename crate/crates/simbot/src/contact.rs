//! Splitting the ground reaction over the load cells.

use mfgait_core::gait_plan::SupportMode;
use mfgait_core::sensing::CELL_COUNT;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Slack on the unit-square bounds, so points on a shoe edge still count.
const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactState {
    pub left: bool,
    pub right: bool,
}

impl ContactState {
    pub fn as_array(&self) -> [bool; 2] {
        [self.left, self.right]
    }

    pub fn support(&self) -> Option<SupportMode> {
        match (self.left, self.right) {
            (true, true) => Some(SupportMode::Double),
            (true, false) => Some(SupportMode::SingleLeft),
            (false, true) => Some(SupportMode::SingleRight),
            (false, false) => None,
        }
    }
}

/// A shoe's cell rectangle as centre plus half-axes; a point is
/// `c + u e1 + v e2` with `|u|, |v| <= 1` inside.
struct ShoeFrame {
    c: Vector2<f64>,
    inv: Matrix2<f64>,
}

/// Bilinear sign pattern for the corner order FL, FR, RL, RR.
const SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

impl ShoeFrame {
    fn new(cells: &[Vector2<f64>]) -> Result<Self, SimError> {
        let c = cells.iter().sum::<Vector2<f64>>() / 4.0;
        let e1 = (cells[0] + cells[1]) / 2.0 - c;
        let e2 = (cells[0] + cells[2]) / 2.0 - c;
        let inv = Matrix2::from_columns(&[e1, e2])
            .try_inverse()
            .ok_or_else(|| SimError::BadSpec("shoe cells are collinear".into()))?;
        Ok(Self { c, inv })
    }

    fn uv(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.inv * (p - self.c)
    }

    fn inside(&self, p: &Vector2<f64>) -> bool {
        self.uv(p).amax() <= 1.0 + EDGE_TOL
    }

    fn weights(&self, p: &Vector2<f64>) -> [f64; 4] {
        let uv = self.uv(p);
        let (u, v) = (uv.x.clamp(-1.0, 1.0), uv.y.clamp(-1.0, 1.0));
        SIGNS.map(|(su, sv)| (1.0 + su * u) * (1.0 + sv * v) / 4.0)
    }
}

/// Shrinks `[lo, hi]` to the `t` with `|a + b t| <= 1`.
fn restrict(lo: &mut f64, hi: &mut f64, a: f64, b: f64) {
    let lim = 1.0 + EDGE_TOL;
    if b.abs() < 1e-15 {
        if a.abs() > lim {
            *lo = f64::INFINITY;
        }
        return;
    }
    let (t1, t2) = ((-lim - a) / b, (lim - a) / b);
    *lo = lo.max(t1.min(t2));
    *hi = hi.min(t1.max(t2));
}

/// Cell forces whose weighted centroid is `cop` and whose sum is `grf`.
/// `positions` are the true planar cell positions (left FL, FR, RL, RR then
/// right).
///
/// In double support the load share follows the lever rule: the left share
/// `t` is the projection of the CoP onto the axis between shoe centres, and
/// both shoe CoPs sit at the same offset from their centres. When that puts a
/// shoe CoP outside its rectangle, `t` moves to the nearest feasible value.
pub fn distribute_forces(
    cop: &Vector2<f64>,
    grf: f64,
    contacts: ContactState,
    positions: &[Vector2<f64>; CELL_COUNT],
) -> Result<[f64; CELL_COUNT], SimError> {
    let left = ShoeFrame::new(&positions[..4])?;
    let right = ShoeFrame::new(&positions[4..])?;
    let mut out = [0.0; CELL_COUNT];
    let mut put = |offset: usize, shoe: &ShoeFrame, p: &Vector2<f64>, load: f64| {
        for (k, w) in shoe.weights(p).into_iter().enumerate() {
            out[offset + k] = load * w;
        }
    };
    let outside = || SimError::Falls(format!("CoP ({:.3}, {:.3}) outside the support polygon", cop.x, cop.y));
    match (contacts.left, contacts.right) {
        (false, false) => return Err(SimError::Falls("no shoe touches the ground".into())),
        (true, false) | (false, true) => {
            let (shoe, offset) = if contacts.left { (&left, 0) } else { (&right, 4) };
            if !shoe.inside(cop) {
                return Err(outside());
            }
            put(offset, shoe, cop, grf);
        }
        (true, true) => {
            let delta = left.c - right.c;
            let len2 = delta.norm_squared();
            let t_star = if len2 > 0.0 { (cop - right.c).dot(&delta) / len2 } else { 0.5 };
            // Shoe CoPs: p_L = cop + (1 - t) delta, p_R = cop - t delta.
            let (mut lo, mut hi) = (0.0, 1.0);
            let ul0 = left.uv(&(cop + delta));
            let ul1 = left.inv * (-delta);
            let ur0 = right.uv(cop);
            let ur1 = right.inv * (-delta);
            for k in 0..2 {
                restrict(&mut lo, &mut hi, ul0[k], ul1[k]);
                restrict(&mut lo, &mut hi, ur0[k], ur1[k]);
            }
            let t = if lo <= hi {
                t_star.clamp(lo, hi)
            } else if right.inside(cop) {
                0.0
            } else if left.inside(cop) {
                1.0
            } else {
                return Err(outside());
            };
            if t > 0.0 {
                put(0, &left, &(cop + (1.0 - t) * delta), t * grf);
            }
            if t < 1.0 {
                put(4, &right, &(cop - t * delta), (1.0 - t) * grf);
            }
        }
    }
    Ok(out)
}
