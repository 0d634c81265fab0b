//! Leg joint identifiers, joint vectors and limits.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Side;

/// The five walking joints of each leg, left leg first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JointId {
    LHipRoll,
    LHipPitch,
    LKneePitch,
    LAnklePitch,
    LAnkleRoll,
    RHipRoll,
    RHipPitch,
    RKneePitch,
    RAnklePitch,
    RAnkleRoll,
}

impl JointId {
    pub const ALL: [JointId; 10] = [
        JointId::LHipRoll,
        JointId::LHipPitch,
        JointId::LKneePitch,
        JointId::LAnklePitch,
        JointId::LAnkleRoll,
        JointId::RHipRoll,
        JointId::RHipPitch,
        JointId::RKneePitch,
        JointId::RAnklePitch,
        JointId::RAnkleRoll,
    ];

    /// Hip- and ankle-roll joints of both legs.
    pub const ROLL: [JointId; 4] = [
        JointId::LHipRoll,
        JointId::LAnkleRoll,
        JointId::RHipRoll,
        JointId::RAnkleRoll,
    ];

    /// Hip-, knee- and ankle-pitch joints of both legs.
    pub const PITCH: [JointId; 6] = [
        JointId::LHipPitch,
        JointId::LKneePitch,
        JointId::LAnklePitch,
        JointId::RHipPitch,
        JointId::RKneePitch,
        JointId::RAnklePitch,
    ];

    pub fn side(self) -> Side {
        if (self as usize) < 5 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn is_roll(self) -> bool {
        matches!(
            self,
            JointId::LHipRoll | JointId::LAnkleRoll | JointId::RHipRoll | JointId::RAnkleRoll
        )
    }

    /// Same joint on the other leg.
    pub fn mirror(self) -> JointId {
        let i = self as usize;
        JointId::ALL[(i + 5) % 10]
    }

    pub fn name(self) -> &'static str {
        match self {
            JointId::LHipRoll => "LHipRoll",
            JointId::LHipPitch => "LHipPitch",
            JointId::LKneePitch => "LKneePitch",
            JointId::LAnklePitch => "LAnklePitch",
            JointId::LAnkleRoll => "LAnkleRoll",
            JointId::RHipRoll => "RHipRoll",
            JointId::RHipPitch => "RHipPitch",
            JointId::RKneePitch => "RKneePitch",
            JointId::RAnklePitch => "RAnklePitch",
            JointId::RAnkleRoll => "RAnkleRoll",
        }
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown joint name {0:?}")]
pub struct UnknownJoint(pub String);

impl FromStr for JointId {
    type Err = UnknownJoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JointId::ALL
            .into_iter()
            .find(|j| j.name() == s)
            .ok_or_else(|| UnknownJoint(s.to_string()))
    }
}

/// Joint angles in radians, keyed and ordered by [`JointId`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(BTreeMap<JointId, f64>);

impl JointVector {
    pub fn zeros(joints: &[JointId]) -> Self {
        Self(joints.iter().map(|&j| (j, 0.0)).collect())
    }

    pub fn home() -> Self {
        Self::zeros(&JointId::ALL)
    }

    pub fn get(&self, j: JointId) -> Option<f64> {
        self.0.get(&j).copied()
    }

    /// Angle of `j`, or 0 when the vector does not carry it.
    pub fn angle(&self, j: JointId) -> f64 {
        self.get(j).unwrap_or(0.0)
    }

    pub fn set(&mut self, j: JointId, value: f64) {
        self.0.insert(j, value);
    }

    pub fn with(mut self, j: JointId, value: f64) -> Self {
        self.set(j, value);
        self
    }

    pub fn joints(&self) -> impl Iterator<Item = JointId> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (JointId, f64)> + '_ {
        self.0.iter().map(|(&j, &v)| (j, v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: JointId) -> bool {
        self.0.contains_key(&j)
    }

    pub fn same_joints(&self, joints: &[JointId]) -> bool {
        self.len() == joints.len() && joints.iter().all(|j| self.contains(*j))
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.iter()
            .map(|(j, v)| (v - other.angle(j)).abs())
            .fold(0.0, f64::max)
    }
}

impl FromIterator<(JointId, f64)> for JointVector {
    fn from_iter<T: IntoIterator<Item = (JointId, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lower: f64,
    pub upper: f64,
}

impl Range {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }
}

/// Per-joint angle ranges (rad).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointLimits(BTreeMap<JointId, Range>);

impl JointLimits {
    pub fn new(ranges: impl IntoIterator<Item = (JointId, Range)>) -> Self {
        Self(ranges.into_iter().collect())
    }

    pub fn unbounded() -> Self {
        Self(BTreeMap::new())
    }

    /// NAO-like leg ranges, mirror symmetric between legs.
    pub fn nao() -> Self {
        let left = [
            (JointId::LHipRoll, -0.3794, 0.7904),
            (JointId::LHipPitch, -1.5358, 0.4840),
            (JointId::LKneePitch, -0.0923, 2.1125),
            (JointId::LAnklePitch, -1.1894, 0.9227),
            (JointId::LAnkleRoll, -0.3978, 0.7690),
        ];
        let mut map = BTreeMap::new();
        for (j, lo, hi) in left {
            map.insert(j, Range { lower: lo, upper: hi });
            let mirrored = if j.is_roll() {
                Range { lower: -hi, upper: -lo }
            } else {
                Range { lower: lo, upper: hi }
            };
            map.insert(j.mirror(), mirrored);
        }
        Self(map)
    }

    pub fn range(&self, j: JointId) -> Range {
        self.0.get(&j).copied().unwrap_or(Range {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        })
    }

    pub fn clamp(&self, j: JointId, v: f64) -> f64 {
        self.range(j).clamp(v)
    }

    pub fn contains(&self, q: &JointVector) -> bool {
        q.iter().all(|(j, v)| self.range(j).contains(v))
    }
}

impl Default for JointLimits {
    fn default() -> Self {
        Self::nao()
    }
}
