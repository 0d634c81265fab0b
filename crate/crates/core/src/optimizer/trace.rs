use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::gradient::measure;
use super::world::SensorWorld;
use super::OptimizerError;
use crate::cost::{CostWeights, Observation};
use crate::gait_plan::{mirror_transition, GaitCycle, TransitionObjective};
use crate::geometry::Side;
use crate::joints::JointVector;

/// One line of the trajectory log. Update 0 of each transition is its
/// starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// Position of the transition in the cycle, from 1.
    pub transition: usize,
    #[serde(default)]
    pub mirrored: bool,
    pub base: Side,
    pub update: usize,
    pub q: JointVector,
    pub cost: f64,
    pub grad: JointVector,
    pub eta: f64,
    pub searches: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<UpdateRecord>,
}

impl TrajectoryLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, OptimizerError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| OptimizerError::Log(format!("line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| OptimizerError::Log(format!("line {}: {e}", i + 1)))?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    /// `transition,mirrored,update,cost` rows for plotting.
    pub fn cost_csv(&self) -> String {
        let mut out = String::from("transition,mirrored,update,cost\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.transition, r.mirrored, r.update, r.cost);
        }
        out
    }

    pub fn transition(&self, t: usize, mirrored: bool) -> impl Iterator<Item = &UpdateRecord> {
        self.records
            .iter()
            .filter(move |r| r.transition == t && r.mirrored == mirrored)
    }

    /// Number of updates taken by each transition of the first half.
    pub fn update_counts(&self) -> Vec<usize> {
        let n = self.records.iter().map(|r| r.transition).max().unwrap_or(0);
        (1..=n)
            .map(|t| self.transition(t, false).map(|r| r.update).max().unwrap_or(0))
            .collect()
    }
}

/// The objective a record was scored against.
pub fn objective_for(cycle: &GaitCycle, rec: &UpdateRecord) -> Result<TransitionObjective, OptimizerError> {
    let obj = cycle
        .objectives
        .get(rec.transition.wrapping_sub(1))
        .ok_or_else(|| OptimizerError::Log(format!("transition {} not in cycle", rec.transition)))?;
    Ok(if rec.mirrored { mirror_transition(obj) } else { obj.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub transition: usize,
    pub mirrored: bool,
    pub update: usize,
    pub obs: Observation,
    pub cost: f64,
    pub stored_cost: f64,
}

/// Drives the world through every stored configuration and re-scores it.
pub fn replay<W: SensorWorld + ?Sized>(
    world: &mut W,
    cycle: &GaitCycle,
    log: &TrajectoryLog,
    wts: &CostWeights,
) -> Result<Vec<ReplayRow>, OptimizerError> {
    let current = world.joints();
    let mut rows = Vec::with_capacity(log.records.len());
    for rec in &log.records {
        let stray = rec.q.joints().find(|j| !current.contains(*j));
        if let Some(j) = stray.or_else(|| current.joints().find(|j| !rec.q.contains(*j))) {
            return Err(OptimizerError::Log(format!(
                "update {} of transition {}: joint set mismatch at {j}",
                rec.update, rec.transition
            )));
        }
        let obj = objective_for(cycle, rec)?;
        let m = measure(world, &rec.q, &obj, wts)?;
        rows.push(ReplayRow {
            transition: rec.transition,
            mirrored: rec.mirrored,
            update: rec.update,
            obs: m.obs,
            cost: m.cost,
            stored_cost: rec.cost,
        });
    }
    Ok(rows)
}
