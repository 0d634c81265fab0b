use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use mfgait_core::calibration::{
    calibrate, capture_reference, mae_cop, mae_grf, measurements, replay_volts, split_train_test, CalibError,
    CalibResult, ReferenceLog, SensorParams, SplitMae,
};
use mfgait_core::gait_plan::{build_cycle_with_layout, GaitCycle};
use mfgait_core::optimizer::{objective_for, optimize_cycle, replay, OptimizerError, Termination, TrajectoryLog};
use mfgait_simbot::{corrupted_params, SimWorld};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::args::{CalibrateArgs, OptimizeArgs, ReplayArgs, ReportArgs, RunArgs};
use crate::artifacts::OutDir;
use crate::config::{Overlay, RunConfig};
use crate::error::CliError;

pub const CYCLE: &str = "cycle.json";
pub const TRAJECTORY: &str = "trajectory.jsonl";
pub const COSTS: &str = "costs.csv";
pub const OPTIMIZE_SUMMARY: &str = "optimize_summary.json";
pub const REPLAY: &str = "replay.csv";
pub const REPLAY_SUMMARY: &str = "replay_summary.json";
pub const REFERENCE: &str = "reference.jsonl";
pub const CALIBRATION: &str = "calibration.json";
pub const COP_SERIES: &str = "cop_series.csv";
pub const REPORT: &str = "report.md";

fn world(cfg: &RunConfig) -> Result<SimWorld, CliError> {
    SimWorld::new(cfg.robot_spec()?).map_err(|e| CliError::Config(e.to_string()))
}

fn plan_cycle(cfg: &RunConfig) -> Result<GaitCycle, CliError> {
    let layout = cfg.robot_spec()?.layout().map_err(|e| CliError::Config(e.to_string()))?;
    build_cycle_with_layout(cfg.gait, cfg.skip_lift, cfg.cop_centering, &layout).map_err(|e| CliError::Config(e.to_string()))
}

fn read_cycle(path: &Path) -> Result<GaitCycle, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cycle {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("cycle {}: {e}", path.display())))
}

/// `--cycle`, else the cycle left in the output directory, else a new plan.
fn cycle_for(cfg: &RunConfig, explicit: Option<&Path>) -> Result<GaitCycle, CliError> {
    match explicit {
        Some(p) => read_cycle(p),
        None if cfg.out.join(CYCLE).is_file() => read_cycle(&cfg.out.join(CYCLE)),
        None => plan_cycle(cfg),
    }
}

fn read_trajectory(path: &Path) -> Result<TrajectoryLog, CliError> {
    let f = File::open(path).map_err(|e| CliError::Config(format!("trajectory {}: {e}", path.display())))?;
    TrajectoryLog::read_jsonl(BufReader::new(f)).map_err(|e| CliError::BadData(format!("trajectory {}: {e}", path.display())))
}

fn trajectory_path(cfg: &RunConfig, explicit: Option<&PathBuf>) -> PathBuf {
    explicit.cloned().unwrap_or_else(|| cfg.out.join(TRAJECTORY))
}

fn optimizer_error(e: OptimizerError) -> CliError {
    match e {
        OptimizerError::Config(_) | OptimizerError::Plan(_) | OptimizerError::Cost(_) => CliError::Config(e.to_string()),
        OptimizerError::Log(_) | OptimizerError::World(_) => CliError::BadData(e.to_string()),
        _ => CliError::NonConvergence(e.to_string()),
    }
}

fn calib_error(e: CalibError) -> CliError {
    match e {
        CalibError::FitFailed { .. } => CliError::NonConvergence(e.to_string()),
        CalibError::BadParams(_) | CalibError::BadWeights(_) => CliError::Config(e.to_string()),
        _ => CliError::BadData(e.to_string()),
    }
}

pub fn plan(args: &RunArgs) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(Overlay::run(args), args.config.as_deref())?;
    let cycle = plan_cycle(&cfg)?;
    let out = OutDir::create(&cfg.out)?;
    out.write(CYCLE, cycle.to_json() + "\n")?;
    out.write_manifest("plan", &cfg)?;
    let labels: Vec<String> = cycle.objectives.iter().map(|o| o.label()).collect();
    Ok(format!("planned {} objectives ({}) in {}", labels.len(), labels.join(", "), out.file(CYCLE).display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSummary {
    pub transition: usize,
    pub label: String,
    pub mirrored: bool,
    pub updates: usize,
    pub searches: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_transition: Option<usize>,
    pub terminations: Vec<Termination>,
    pub transitions: Vec<TransitionSummary>,
}

pub fn summarize(cycle: &GaitCycle, log: &TrajectoryLog) -> Vec<TransitionSummary> {
    let mut keys: Vec<(bool, usize)> = log.records.iter().map(|r| (r.mirrored, r.transition)).collect();
    keys.dedup();
    keys.into_iter()
        .filter_map(|(mirrored, t)| {
            let recs: Vec<_> = log.transition(t, mirrored).collect();
            let (first, last) = (recs.first()?, recs.last()?);
            Some(TransitionSummary {
                transition: t,
                label: objective_for(cycle, first).map(|o| o.label()).unwrap_or_default(),
                mirrored,
                updates: last.update,
                searches: recs.iter().map(|r| r.searches).sum(),
                initial_cost: first.cost,
                final_cost: last.cost,
            })
        })
        .collect()
}

pub fn optimize(args: &OptimizeArgs) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(Overlay::optimize(args), args.run.config.as_deref())?;
    let cycle = match &args.cycle {
        Some(p) => read_cycle(p)?,
        None => plan_cycle(&cfg)?,
    };
    let mut world = world(&cfg)?;
    let out = OutDir::create(&cfg.out)?;
    out.write(CYCLE, cycle.to_json() + "\n")?;
    let (log, summary, err) = match optimize_cycle(&mut world, &cycle, &cfg.weights, &cfg.optimizer) {
        Ok(res) => {
            let s = OptimizeSummary {
                converged: true,
                error: None,
                failed_transition: None,
                terminations: res.terminations,
                transitions: summarize(&cycle, &res.log),
            };
            (res.log, s, None)
        }
        Err(f) => {
            let s = OptimizeSummary {
                converged: false,
                error: Some(f.error.to_string()),
                failed_transition: Some(f.transition),
                terminations: Vec::new(),
                transitions: summarize(&cycle, &f.log),
            };
            (f.log, s, Some(f.error))
        }
    };
    out.write(TRAJECTORY, log.to_jsonl())?;
    out.write(COSTS, log.cost_csv())?;
    out.write_json(OPTIMIZE_SUMMARY, &summary)?;
    out.write_manifest("optimize", &cfg)?;
    if let Some(e) = err {
        return Err(optimizer_error(e));
    }
    let counts: Vec<String> = log.update_counts().iter().map(|n| n.to_string()).collect();
    Ok(format!(
        "converged: {} records, updates per transition [{}], log {}",
        log.records.len(),
        counts.join(", "),
        out.file(TRAJECTORY).display()
    ))
}

#[derive(Debug, Serialize)]
struct ReplayCsvRow {
    transition: usize,
    mirrored: bool,
    update: usize,
    cop_x: f64,
    cop_y: f64,
    grf: f64,
    left_x: f64,
    left_y: f64,
    left_z: f64,
    right_x: f64,
    right_y: f64,
    right_z: f64,
    cost: f64,
    stored_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub rows: usize,
    pub corrupted: bool,
    pub max_abs_cost_diff: f64,
}

fn sim_truth(world: &SimWorld, seed: Option<u64>) -> Option<[mfgait_core::sensing::CellParams; 8]> {
    seed.map(|s| corrupted_params(&world.installed(), s))
}

pub fn replay_cmd(args: &ReplayArgs) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(Overlay::replay(args), args.run.config.as_deref())?;
    let log = read_trajectory(&trajectory_path(&cfg, args.log.as_ref()))?;
    let cycle = cycle_for(&cfg, args.cycle.as_deref())?;
    let mut world = world(&cfg)?;
    let seed = cfg.calibration.corrupt_seed;
    if let Some(t) = sim_truth(&world, seed) {
        world = world.with_truth(t);
    }
    let rows = replay(&mut world, &cycle, &log, &cfg.weights).map_err(optimizer_error)?;
    let out = OutDir::create(&cfg.out)?;
    let max_abs_cost_diff = rows.iter().map(|r| (r.cost - r.stored_cost).abs()).fold(0.0, f64::max);
    out.write_csv(
        REPLAY,
        rows.iter().map(|r| ReplayCsvRow {
            transition: r.transition,
            mirrored: r.mirrored,
            update: r.update,
            cop_x: r.obs.cop.cop.x,
            cop_y: r.obs.cop.cop.y,
            grf: r.obs.cop.grf,
            left_x: r.obs.left.position.x,
            left_y: r.obs.left.position.y,
            left_z: r.obs.left.position.z,
            right_x: r.obs.right.position.x,
            right_y: r.obs.right.position.y,
            right_z: r.obs.right.position.z,
            cost: r.cost,
            stored_cost: r.stored_cost,
        }),
    )?;
    let summary = ReplaySummary {
        rows: rows.len(),
        corrupted: seed.is_some(),
        max_abs_cost_diff,
    };
    out.write_json(REPLAY_SUMMARY, &summary)?;
    out.write_manifest("replay", &cfg)?;
    Ok(format!("replayed {} configurations, largest cost difference {:.3e}", rows.len(), max_abs_cost_diff))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeSplits {
    pub grf: SplitMae,
    pub cop: SplitMae,
}

/// Magnitudes measured on the physical robot, for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareReference {
    pub grf_pre: f64,
    pub grf_post: f64,
    pub cop_pre: f64,
    pub cop_post: f64,
}

pub const HARDWARE_REFERENCE: HardwareReference = HardwareReference {
    grf_pre: 3.5,
    grf_post: 0.09,
    cop_pre: 4.5,
    cop_post: 0.8,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub result: CalibResult,
    /// MAE under the parameters installed before calibration.
    pub uncalibrated: MaeSplits,
    /// `1 - post/pre` on the test split.
    pub test_reduction_grf: f64,
    pub test_reduction_cop: f64,
    /// Largest relative error of the fitted parameters against the
    /// simulated truth.
    pub truth_max_relative_error: f64,
    pub max_test_mae_grf: f64,
    pub max_test_mae_cop: f64,
    pub passed: bool,
    pub hardware_reference: HardwareReference,
}

#[derive(Debug, Serialize)]
struct CopSeriesRow {
    sample: usize,
    split: &'static str,
    grf_ref: f64,
    grf_initial: f64,
    grf_fitted: f64,
    cop_ref_x: f64,
    cop_ref_y: f64,
    cop_initial_x: f64,
    cop_initial_y: f64,
    cop_fitted_x: f64,
    cop_fitted_y: f64,
}

fn mae_splits(train: &ReferenceLog, test: &ReferenceLog, params: &SensorParams) -> Result<MaeSplits, CalibError> {
    let one = |log: &ReferenceLog| -> Result<(f64, f64), CalibError> {
        let (grf, cop) = measurements(log, params)?;
        let grf_ref: Vec<f64> = log.samples.iter().map(|s| s.grf_ref).collect();
        let cop_ref: Vec<Vector2<f64>> = log.samples.iter().map(|s| s.cop_ref).collect();
        Ok((mae_grf(&grf, &grf_ref)?, mae_cop(&cop, &cop_ref)?))
    };
    let (g_train, c_train) = one(train)?;
    let (g_test, c_test) = one(test)?;
    Ok(MaeSplits {
        grf: SplitMae { train: g_train, test: g_test },
        cop: SplitMae { train: c_train, test: c_test },
    })
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<String, CliError> {
    let cfg = RunConfig::resolve(Overlay::calibrate(args), args.run.config.as_deref())?;
    let c = &cfg.calibration;
    let traj = read_trajectory(&trajectory_path(&cfg, args.log.as_ref()))?;
    let out = OutDir::create(&cfg.out)?;
    let mut accurate = world(&cfg)?;
    let installed = SensorParams(accurate.installed());
    let reference = match &args.reference {
        Some(p) => {
            let f = File::open(p).map_err(|e| CliError::Config(format!("reference {}: {e}", p.display())))?;
            ReferenceLog::read_jsonl(BufReader::new(f)).map_err(calib_error)?
        }
        None => {
            let r = capture_reference(&mut accurate, &traj, &installed).map_err(calib_error)?;
            out.write(REFERENCE, r.to_jsonl())?;
            r
        }
    };
    let mut broken = world(&cfg)?;
    let truth = sim_truth(&broken, c.corrupt_seed).unwrap_or(installed.0);
    broken = broken.with_truth(truth);
    let volts = replay_volts(&mut broken, &traj).map_err(calib_error)?;
    let data = reference.with_volts(&volts).map_err(calib_error)?;
    let result = calibrate(&data, &c.weights, c.ratio, &c.fit).map_err(calib_error)?;
    let (train, test) = split_train_test(&data, c.ratio).map_err(calib_error)?;
    let uncalibrated = mae_splits(&train, &test, &installed).map_err(calib_error)?;

    let initial = SensorParams::uniform(result.init.a0, result.init.b0);
    let (g0, c0) = measurements(&data, &initial).map_err(calib_error)?;
    let (g1, c1) = measurements(&data, &result.params).map_err(calib_error)?;
    out.write_csv(
        COP_SERIES,
        data.samples.iter().enumerate().map(|(k, s)| CopSeriesRow {
            sample: k,
            split: if k < train.len() { "train" } else { "test" },
            grf_ref: s.grf_ref,
            grf_initial: g0[k],
            grf_fitted: g1[k],
            cop_ref_x: s.cop_ref.x,
            cop_ref_y: s.cop_ref.y,
            cop_initial_x: c0[k].x,
            cop_initial_y: c0[k].y,
            cop_fitted_x: c1[k].x,
            cop_fitted_y: c1[k].y,
        }),
    )?;

    let reduction = |pre: f64, post: f64| if pre > 0.0 { 1.0 - post / pre } else { 0.0 };
    let (grf, cop) = (result.mae.grf, result.mae.cop);
    let passed = grf.post.test <= c.max_test_mae_grf && cop.post.test <= c.max_test_mae_cop;
    let report = CalibrationReport {
        test_reduction_grf: reduction(grf.pre.test, grf.post.test),
        test_reduction_cop: reduction(cop.pre.test, cop.post.test),
        truth_max_relative_error: result.params.max_relative_error(&SensorParams(truth)),
        uncalibrated,
        max_test_mae_grf: c.max_test_mae_grf,
        max_test_mae_cop: c.max_test_mae_cop,
        passed,
        hardware_reference: HARDWARE_REFERENCE,
        result,
    };
    out.write_json(CALIBRATION, &report)?;
    out.write_manifest("calibrate", &cfg)?;
    let line = format!(
        "test MAE: GRF {:.4} -> {:.4} N, CoP {:.4} -> {:.4} mm",
        grf.pre.test, grf.post.test, cop.pre.test, cop.post.test
    );
    if !passed {
        return Err(CliError::NonConvergence(format!("post-fit MAE above thresholds; {line}")));
    }
    Ok(line)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, CliError> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::BadData(format!("{}: {e}", path.display())))
}

pub fn report(args: &ReportArgs) -> Result<String, CliError> {
    let dir = &args.out;
    let opt: Option<OptimizeSummary> = read_json(&dir.join(OPTIMIZE_SUMMARY))?;
    let rep: Option<ReplaySummary> = read_json(&dir.join(REPLAY_SUMMARY))?;
    let cal: Option<CalibrationReport> = read_json(&dir.join(CALIBRATION))?;
    if opt.is_none() && rep.is_none() && cal.is_none() {
        return Err(CliError::Config(format!("nothing to report in {}", dir.display())));
    }
    let mut md = String::from("# Run report\n");
    if let Some(s) = &opt {
        md.push_str(&format!("\n## Optimization\n\nconverged: {}\n", s.converged));
        if let Some(e) = &s.error {
            md.push_str(&format!("error: {e}\n"));
        }
        md.push_str("\n| transition | mirrored | updates | searches | initial cost | final cost |\n|---|---|---|---|---|---|\n");
        for t in &s.transitions {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {:.3} | {:.4} |\n",
                t.label, t.mirrored, t.updates, t.searches, t.initial_cost, t.final_cost
            ));
        }
    }
    if let Some(r) = &rep {
        md.push_str(&format!(
            "\n## Replay\n\n{} configurations, corrupted sensors: {}, largest cost difference {:.3e}\n",
            r.rows, r.corrupted, r.max_abs_cost_diff
        ));
    }
    if let Some(c) = &cal {
        let m = &c.result.mae;
        let h = &c.hardware_reference;
        md.push_str(&format!(
            "\n## Calibration\n\ninitial guess a0 = {:.6}, b0 = {:.6}; {} iterations; largest parameter error {:.3e}\n\n\
             | MAE | uncalibrated | initial guess | fitted | hardware before | hardware after |\n|---|---|---|---|---|---|\n\
             | GRF test (N) | {:.4} | {:.4} | {:.4} | {} | {} |\n\
             | CoP test (mm) | {:.4} | {:.4} | {:.4} | {} | {} |\n\npassed: {}\n",
            c.result.init.a0,
            c.result.init.b0,
            c.result.iters.len().saturating_sub(1),
            c.truth_max_relative_error,
            c.uncalibrated.grf.test,
            m.grf.pre.test,
            m.grf.post.test,
            h.grf_pre,
            h.grf_post,
            c.uncalibrated.cop.test,
            m.cop.pre.test,
            m.cop.post.test,
            h.cop_pre,
            h.cop_post,
            c.passed,
        ));
    }
    let out = OutDir::create(dir)?;
    out.write(REPORT, &md)?;
    out.write_manifest("report", &serde_json::json!({ "out": dir }))?;
    Ok(md)
}
