//! Finite-difference gradient descent through an opaque [`SensorWorld`].
//!
//! Every cost value comes from commanding joints and reading sensors. The
//! gradient of one update is estimated with two probes per active joint;
//! the same probes also give a residual Jacobian, used by the default
//! Gauss-Newton preconditioner to scale the descent direction.

mod gradient;
mod step;
mod trace;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gradient::{estimate_gradient, measure, GradientEstimate, Measurement, Probe};
pub use step::{armijo_step, direction, gd_step, MAX_BACKTRACKS};
pub use trace::{objective_for, replay, ReplayRow, TrajectoryLog, UpdateRecord};
pub use world::{RawReading, RawSensorWorld, SensorWorld, WorldError};

use crate::cost::{CostError, CostWeights};
use crate::gait_plan::{mirror_joint_trajectory, mirror_joints, mirror_transition, GaitCycle, GaitError, JointTrajectory, TransitionObjective};
use crate::joints::{JointId, JointLimits, JointVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Plan(#[from] GaitError),
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("joint {0} has no room for a probe inside its limits")]
    DegenerateProbe(JointId),
    #[error("line search stalled after {backtracks} backtracks")]
    Stall { backtracks: usize },
    #[error("no convergence after {updates} updates: cost {cost}")]
    NonConvergence { updates: usize, cost: f64 },
    #[error("trajectory log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Fixed,
    Armijo { c: f64, beta: f64, eta_max: f64 },
}

impl StepMode {
    pub fn armijo() -> Self {
        StepMode::Armijo {
            c: 1e-4,
            beta: 0.5,
            eta_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// Plain gradient: `d = g`.
    None,
    /// `d = (J^T J + mu I)^-1 g` with `mu = damping * tr(J^T J) / n`.
    GaussNewton { damping: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Probe half-width (rad).
    pub delta: f64,
    pub eta: f64,
    pub step_mode: StepMode,
    pub preconditioner: Preconditioner,
    /// Stop once the cost drops below this (mm^2).
    pub eps_cost: f64,
    /// Stop once successive costs differ by less than this.
    pub eps_delta: f64,
    pub max_updates: usize,
    /// Budget of sensor queries per transition, if any.
    pub max_searches: Option<usize>,
    /// Largest joint move of one update (rad).
    pub max_step: f64,
    pub limits: JointLimits,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            delta: 0.02,
            eta: 0.5,
            step_mode: StepMode::Fixed,
            preconditioner: Preconditioner::GaussNewton { damping: 1e-3 },
            eps_cost: 1.0,
            eps_delta: 0.01,
            max_updates: 100,
            max_searches: None,
            max_step: 0.1,
            limits: JointLimits::nao(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let positive = [
            ("delta", self.delta),
            ("eta", self.eta),
            ("eps_cost", self.eps_cost),
            ("eps_delta", self.eps_delta),
            ("max_step", self.max_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(OptimizerError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if let StepMode::Armijo { c, beta, eta_max } = self.step_mode {
            if !(c > 0.0 && c < 1.0 && beta > 0.0 && beta < 1.0 && eta_max > 0.0) {
                return Err(OptimizerError::Config(
                    "armijo needs 0 < c < 1, 0 < beta < 1, eta_max > 0".into(),
                ));
            }
        }
        if let Preconditioner::GaussNewton { damping } = self.preconditioner {
            if !(damping > 0.0) {
                return Err(OptimizerError::Config(format!("damping must be > 0, got {damping}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Cost,
    Delta,
    MaxUpdates,
    SearchBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionResult {
    pub q: JointVector,
    pub cost: f64,
    pub updates: usize,
    pub termination: Termination,
    pub trace: Vec<UpdateRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionFailure {
    pub error: OptimizerError,
    pub q: JointVector,
    pub trace: Vec<UpdateRecord>,
}

fn record(obj: &TransitionObjective, update: usize, q: &JointVector, cost: f64) -> UpdateRecord {
    UpdateRecord {
        transition: 0,
        mirrored: obj.mirrored,
        base: obj.base_side,
        update,
        q: q.clone(),
        cost,
        grad: JointVector::default(),
        eta: 0.0,
        searches: 0,
    }
}

fn descend<W: SensorWorld + ?Sized>(
    world: &mut W,
    obj: &TransitionObjective,
    wts: &CostWeights,
    config: &OptimizerConfig,
    q: &mut JointVector,
    trace: &mut Vec<UpdateRecord>,
) -> Result<(Termination, f64), OptimizerError> {
    let mut cur = measure(world, q, obj, wts)?;
    trace.push(record(obj, 0, q, cur.cost));
    let probes = 2 * obj.active_joints.len();
    let mut queries = 1;
    let mut updates = 0;
    loop {
        if cur.cost < config.eps_cost {
            return Ok((Termination::Cost, cur.cost));
        }
        if updates >= config.max_updates {
            return Ok((Termination::MaxUpdates, cur.cost));
        }
        if config.max_searches.is_some_and(|b| queries + probes + 1 > b) {
            return Ok((Termination::SearchBudget, cur.cost));
        }
        let est = estimate_gradient(world, q, obj, wts, config.delta, &config.limits)?;
        let d = direction(&est, config.preconditioner);
        let (next, at, eta, searches) = match config.step_mode {
            StepMode::Fixed => {
                let (next, eta) = gd_step(q, &est.joints, &d, config.eta, config);
                let at = measure(world, &next, obj, wts)?;
                queries += 1;
                (next, at, eta, est.searches)
            }
            StepMode::Armijo { c, beta, eta_max } => {
                let a = armijo_step(world, q, cur.cost, &est, &d, obj, wts, config, (c, beta, eta_max))?;
                (a.q, a.at, a.eta, est.searches + a.trials)
            }
        };
        queries += searches;
        updates += 1;
        let mut rec = record(obj, updates, &next, at.cost);
        rec.grad = est.as_joint_vector();
        rec.eta = eta;
        rec.searches = searches;
        trace.push(rec);
        let prev = cur.cost;
        *q = next;
        cur = at;
        if (cur.cost - prev).abs() < config.eps_delta {
            return Ok((Termination::Delta, cur.cost));
        }
    }
}

/// Descends one transition from the world's current configuration.
pub fn optimize_transition<W: SensorWorld + ?Sized>(
    world: &mut W,
    obj: &TransitionObjective,
    wts: &CostWeights,
    config: &OptimizerConfig,
) -> Result<TransitionResult, Box<TransitionFailure>> {
    let mut q = world.joints();
    let mut trace = Vec::new();
    let fail = |error, q: JointVector, trace| Box::new(TransitionFailure { error, q, trace });
    if let Err(e) = config.validate() {
        return Err(fail(e, q, trace));
    }
    match descend(world, obj, wts, config, &mut q, &mut trace) {
        Ok((termination, cost)) => {
            let updates = trace.len() - 1;
            let exhausted = matches!(termination, Termination::MaxUpdates | Termination::SearchBudget);
            if exhausted && cost > 10.0 * config.eps_cost {
                return Err(fail(OptimizerError::NonConvergence { updates, cost }, q, trace));
            }
            Ok(TransitionResult {
                q,
                cost,
                updates,
                termination,
                trace,
            })
        }
        Err(e) => Err(fail(e, q, trace)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub log: TrajectoryLog,
    pub terminations: Vec<Termination>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleFailure {
    pub error: OptimizerError,
    /// Transition (from 1) that failed; 0 for the mirrored half.
    pub transition: usize,
    pub log: TrajectoryLog,
}

/// Solves every transition in order, each from the previous solution, then
/// appends the mirrored half: the stored joint trajectory mirrored and
/// replayed against the mirrored objectives.
pub fn optimize_cycle<W: SensorWorld + ?Sized>(
    world: &mut W,
    cycle: &GaitCycle,
    wts: &CostWeights,
    config: &OptimizerConfig,
) -> Result<CycleResult, Box<CycleFailure>> {
    let mut log = TrajectoryLog::default();
    let mut terminations = Vec::new();
    for (i, obj) in cycle.objectives.iter().enumerate() {
        match optimize_transition(world, obj, wts, config) {
            Ok(res) => {
                log.records.extend(res.trace.into_iter().map(|r| UpdateRecord { transition: i + 1, ..r }));
                terminations.push(res.termination);
            }
            Err(f) => {
                log.records.extend(f.trace.into_iter().map(|r| UpdateRecord { transition: i + 1, ..r }));
                return Err(Box::new(CycleFailure {
                    error: f.error,
                    transition: i + 1,
                    log,
                }));
            }
        }
    }
    match mirrored_half(world, cycle, &log, wts) {
        Ok(recs) => log.records.extend(recs),
        Err(error) => {
            return Err(Box::new(CycleFailure {
                error,
                transition: 0,
                log,
            }))
        }
    }
    Ok(CycleResult { log, terminations })
}

fn mirrored_half<W: SensorWorld + ?Sized>(
    world: &mut W,
    cycle: &GaitCycle,
    log: &TrajectoryLog,
    wts: &CostWeights,
) -> Result<Vec<UpdateRecord>, OptimizerError> {
    let qs: Vec<JointVector> = log.records.iter().map(|r| r.q.clone()).collect();
    let mirrored = mirror_joint_trajectory(&JointTrajectory::from_vectors(&qs)?)?.to_vectors()?;
    let mut out = Vec::with_capacity(qs.len());
    for (rec, qm) in log.records.iter().zip(mirrored) {
        let obj = mirror_transition(&cycle.objectives[rec.transition - 1]);
        let m = measure(world, &qm, &obj, wts)?;
        out.push(UpdateRecord {
            transition: rec.transition,
            mirrored: true,
            base: obj.base_side,
            update: rec.update,
            q: qm,
            cost: m.cost,
            grad: mirror_joints(&rec.grad),
            eta: rec.eta,
            searches: 0,
        });
    }
    Ok(out)
}
