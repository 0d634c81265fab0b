//! Load-cell self-calibration from a replayed reference trajectory.
//!
//! While the sensors are trusted the robot walks a stored trajectory and the
//! resulting GRF, CoP and per-cell forces are kept as reference. Later the
//! same trajectory is replayed and the raw voltages are fitted so that the
//! recomputed GRF, CoP and forces match the reference again.

mod fit;

use std::io::{self, BufRead, Write};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{initial_guess, nls_fit, objective, FitIter, FitOptions, FitReport, InitialGuess};

use crate::optimizer::{RawSensorWorld, TrajectoryLog, WorldError};
use crate::sensing::{cop_from_forces, CellParams, SensingError, CELL_COUNT, DEFAULT_MIN_TOTAL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid sensor parameters: {0}")]
    BadParams(String),
    #[error("invalid calibration weights: {0}")]
    BadWeights(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trajectory does not match the world: {0}")]
    JointMismatch(String),
    #[error("fit failed (damping overflow), best objective {objective}")]
    FitFailed { objective: f64, params: Box<SensorParams> },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("reference log: {0}")]
    Log(String),
}

/// The eight affine `(a_i, b_i)` pairs, cell ids 1..8 in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorParams(pub [CellParams; CELL_COUNT]);

impl SensorParams {
    pub fn uniform(a: f64, b: f64) -> Self {
        Self([CellParams { a, b }; CELL_COUNT])
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        for (i, p) in self.0.iter().enumerate() {
            if p.a == 0.0 || !p.a.is_finite() || !p.b.is_finite() {
                return Err(CalibError::BadParams(format!("cell {} has a = {}, b = {}", i + 1, p.a, p.b)));
            }
        }
        Ok(())
    }

    pub fn forces(&self, volts: &[f64; CELL_COUNT]) -> [f64; CELL_COUNT] {
        std::array::from_fn(|i| self.0[i].force(volts[i]))
    }

    pub(crate) fn to_vec(self) -> Vec<f64> {
        self.0.iter().flat_map(|p| [p.a, p.b]).collect()
    }

    pub(crate) fn from_slice(theta: &[f64]) -> Self {
        Self(std::array::from_fn(|i| CellParams {
            a: theta[2 * i],
            b: theta[2 * i + 1],
        }))
    }

    /// Largest relative error of any gain or offset against `truth`.
    pub fn max_relative_error(&self, truth: &SensorParams) -> f64 {
        self.0
            .iter()
            .zip(truth.0.iter())
            .flat_map(|(p, t)| [(p.a - t.a).abs() / t.a.abs(), (p.b - t.b).abs() / t.b.abs()])
            .fold(0.0, f64::max)
    }
}

/// One settled configuration of the reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub volts: [f64; CELL_COUNT],
    pub grf_ref: f64,
    pub cop_ref: Vector2<f64>,
    pub forces_ref: [f64; CELL_COUNT],
    pub positions: [Vector2<f64>; CELL_COUNT],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceLog {
    pub samples: Vec<ReferenceSample>,
}

impl ReferenceLog {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        if self.samples.len() < 2 {
            return Err(CalibError::DegenerateData(format!(
                "need at least 2 samples, got {}",
                self.samples.len()
            )));
        }
        let finite = self
            .samples
            .iter()
            .all(|s| s.positions.iter().all(|p| p.x.is_finite() && p.y.is_finite()) && s.volts.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(CalibError::DegenerateData("non-finite sample".into()));
        }
        Ok(())
    }

    /// Same references, voltages from another replay.
    pub fn with_volts(&self, volts: &[[f64; CELL_COUNT]]) -> Result<Self, CalibError> {
        if volts.len() != self.samples.len() {
            return Err(CalibError::LengthMismatch(volts.len(), self.samples.len()));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(volts)
                .map(|(s, v)| ReferenceSample { volts: *v, ..*s })
                .collect(),
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, CalibError> {
        let mut samples = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| CalibError::Log(format!("line {}: {e}", i + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            samples.push(serde_json::from_str(&line).map_err(|e| CalibError::Log(format!("line {}: {e}", i + 1)))?);
        }
        Ok(Self { samples })
    }
}

/// Weights of the GRF, CoP and per-cell force terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibWeights {
    pub w_n: f64,
    pub w_c: f64,
    pub w_f: f64,
}

impl CalibWeights {
    pub fn validate(&self) -> Result<(), CalibError> {
        let w = [self.w_n, self.w_c, self.w_f];
        if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || w.iter().all(|x| *x == 0.0) {
            return Err(CalibError::BadWeights(format!("{w:?}")));
        }
        Ok(())
    }
}

impl Default for CalibWeights {
    fn default() -> Self {
        Self {
            w_n: 1.0,
            w_c: 1.0,
            w_f: 1.0,
        }
    }
}

fn check_joint_set<W: RawSensorWorld + ?Sized>(world: &W, traj: &TrajectoryLog) -> Result<(), CalibError> {
    let have = world.joints();
    for rec in &traj.records {
        if let Some(j) = rec.q.joints().find(|j| !have.contains(*j)) {
            return Err(CalibError::JointMismatch(format!("world has no joint {j}")));
        }
    }
    Ok(())
}

/// Raw voltages at every stored configuration.
pub fn replay_volts<W: RawSensorWorld + ?Sized>(
    world: &mut W,
    traj: &TrajectoryLog,
) -> Result<Vec<[f64; CELL_COUNT]>, CalibError> {
    check_joint_set(world, traj)?;
    let mut out = Vec::with_capacity(traj.records.len());
    for rec in &traj.records {
        world.set_joints(&rec.q)?;
        out.push(world.raw(rec.base)?.volts);
    }
    Ok(out)
}

/// Replays `traj` and records voltages plus the GRF, CoP and forces that
/// `params` (trusted) derive from them.
pub fn capture_reference<W: RawSensorWorld + ?Sized>(
    world: &mut W,
    traj: &TrajectoryLog,
    params: &SensorParams,
) -> Result<ReferenceLog, CalibError> {
    params.validate()?;
    check_joint_set(world, traj)?;
    let mut samples = Vec::with_capacity(traj.records.len());
    for rec in &traj.records {
        world.set_joints(&rec.q)?;
        let raw = world.raw(rec.base)?;
        let forces = params.forces(&raw.volts);
        let pairs: Vec<_> = forces.iter().copied().zip(raw.positions.iter().copied()).collect();
        let r = cop_from_forces(&pairs, DEFAULT_MIN_TOTAL)?;
        samples.push(ReferenceSample {
            volts: raw.volts,
            grf_ref: r.grf,
            cop_ref: r.cop,
            forces_ref: forces,
            positions: raw.positions,
        });
    }
    let log = ReferenceLog { samples };
    log.validate()?;
    Ok(log)
}

/// What the robot would report for each sample under `params`.
pub fn measurements(log: &ReferenceLog, params: &SensorParams) -> Result<(Vec<f64>, Vec<Vector2<f64>>), CalibError> {
    let mut grf = Vec::with_capacity(log.len());
    let mut cop = Vec::with_capacity(log.len());
    for s in &log.samples {
        let pairs: Vec<_> = params.forces(&s.volts).into_iter().zip(s.positions).collect();
        let r = cop_from_forces(&pairs, DEFAULT_MIN_TOTAL)?;
        grf.push(r.grf);
        cop.push(r.cop);
    }
    Ok((grf, cop))
}

pub fn mae_grf(current: &[f64], reference: &[f64]) -> Result<f64, CalibError> {
    if current.len() != reference.len() {
        return Err(CalibError::LengthMismatch(current.len(), reference.len()));
    }
    if current.is_empty() {
        return Err(CalibError::DegenerateData("empty series".into()));
    }
    Ok(current.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / current.len() as f64)
}

pub fn mae_cop(current: &[Vector2<f64>], reference: &[Vector2<f64>]) -> Result<f64, CalibError> {
    if current.len() != reference.len() {
        return Err(CalibError::LengthMismatch(current.len(), reference.len()));
    }
    if current.is_empty() {
        return Err(CalibError::DegenerateData("empty series".into()));
    }
    Ok(current.iter().zip(reference).map(|(a, b)| (a - b).norm()).sum::<f64>() / current.len() as f64)
}

/// Contiguous split: the first `floor(ratio * N)` samples train.
pub fn split_train_test(log: &ReferenceLog, ratio: f64) -> Result<(ReferenceLog, ReferenceLog), CalibError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CalibError::DegenerateData(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n_train = (ratio * log.len() as f64 + 1e-9).floor() as usize;
    if n_train < 2 {
        return Err(CalibError::DegenerateData(format!(
            "split leaves {n_train} training samples"
        )));
    }
    let (a, b) = log.samples.split_at(n_train);
    Ok((ReferenceLog { samples: a.to_vec() }, ReferenceLog { samples: b.to_vec() }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMae {
    pub train: f64,
    pub test: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaePair {
    pub pre: SplitMae,
    pub post: SplitMae,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeTable {
    pub grf: MaePair,
    pub cop: MaePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    pub params: SensorParams,
    pub init: InitialGuess,
    pub mae: MaeTable,
    pub objective_init: f64,
    pub objective_fit: f64,
    pub iters: Vec<FitIter>,
    pub jacobian_rank: usize,
}

fn split_mae(train: &ReferenceLog, test: &ReferenceLog, params: &SensorParams) -> Result<(SplitMae, SplitMae), CalibError> {
    let one = |log: &ReferenceLog| -> Result<(f64, f64), CalibError> {
        let (grf, cop) = measurements(log, params)?;
        let grf_ref: Vec<f64> = log.samples.iter().map(|s| s.grf_ref).collect();
        let cop_ref: Vec<Vector2<f64>> = log.samples.iter().map(|s| s.cop_ref).collect();
        Ok((mae_grf(&grf, &grf_ref)?, mae_cop(&cop, &cop_ref)?))
    };
    let (gt, ct) = one(train)?;
    let (gs, cs) = one(test)?;
    Ok((SplitMae { train: gt, test: gs }, SplitMae { train: ct, test: cs }))
}

/// Split, initial guess on the training part, fit, and MAE before and after.
pub fn calibrate(
    log: &ReferenceLog,
    wts: &CalibWeights,
    ratio: f64,
    opts: &FitOptions,
) -> Result<CalibResult, CalibError> {
    let (train, test) = split_train_test(log, ratio)?;
    let init = initial_guess(&train, opts.grf_row)?;
    let start = SensorParams::uniform(init.a0, init.b0);
    let report = nls_fit(&train, &start, wts, opts)?;
    let (grf_pre, cop_pre) = split_mae(&train, &test, &start)?;
    let (grf_post, cop_post) = split_mae(&train, &test, &report.params)?;
    Ok(CalibResult {
        params: report.params,
        init,
        mae: MaeTable {
            grf: MaePair {
                pre: grf_pre,
                post: grf_post,
            },
            cop: MaePair {
                pre: cop_pre,
                post: cop_post,
            },
        },
        objective_init: report.objective_init,
        objective_fit: report.objective,
        iters: report.iters,
        jacobian_rank: report.rank,
    })
}

#[cfg(test)]
mod tests;
