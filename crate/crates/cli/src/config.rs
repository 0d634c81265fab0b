//! Run configuration. Precedence, highest first: `--config` file, command
//! line flags, built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use mfgait_core::calibration::{CalibWeights, FitOptions};
use mfgait_core::cost::CostWeights;
use mfgait_core::gait_plan::GaitParams;
use mfgait_core::optimizer::{OptimizerConfig, Preconditioner, StepMode};
use mfgait_simbot::RobotSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{CalibrateArgs, OptimizeArgs, ReplayArgs, RunArgs};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibConfig {
    pub ratio: f64,
    pub weights: CalibWeights,
    pub fit: FitOptions,
    /// Seed of the simulated sensor corruption; accurate sensors when absent.
    pub corrupt_seed: Option<u64>,
    pub max_test_mae_grf: f64,
    pub max_test_mae_cop: f64,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self {
            ratio: 0.7,
            weights: CalibWeights::default(),
            fit: FitOptions::default(),
            corrupt_seed: None,
            max_test_mae_grf: 0.5,
            max_test_mae_cop: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub robot: Option<PathBuf>,
    /// Seeds the robot's noise hooks.
    pub seed: u64,
    pub gait: GaitParams,
    pub skip_lift: bool,
    pub cop_centering: Option<f64>,
    pub weights: CostWeights,
    pub optimizer: OptimizerConfig,
    pub calibration: CalibConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            robot: None,
            seed: 0,
            gait: GaitParams::default(),
            skip_lift: true,
            cop_centering: None,
            weights: CostWeights::default(),
            optimizer: OptimizerConfig::default(),
            calibration: CalibConfig::default(),
        }
    }
}

/// Overlay built from the flags that were actually given.
#[derive(Debug, Default)]
pub struct Overlay(Map<String, Value>);

impl Overlay {
    fn set<T: Serialize>(&mut self, path: &[&str], value: Option<T>) {
        let Some(value) = value else { return };
        let mut node = &mut self.0;
        for key in &path[..path.len() - 1] {
            node = node
                .entry(key.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("overlay nodes are objects");
        }
        node.insert(path[path.len() - 1].to_string(), serde_json::to_value(value).expect("flag serializes"));
    }

    fn flag<T: Serialize>(&mut self, path: &[&str], on: bool, value: T) {
        self.set(path, on.then_some(value));
    }

    pub fn run(args: &RunArgs) -> Self {
        let mut o = Overlay::default();
        o.set(&["out"], args.out.as_ref());
        o.set(&["robot"], args.robot.as_ref());
        o.set(&["seed"], args.seed);
        o.set(&["gait", "s"], args.step);
        o.set(&["gait", "w"], args.width);
        o.set(&["gait", "h"], args.lift);
        o.flag(&["skip_lift"], args.no_skip_lift, false);
        o.set(&["cop_centering"], args.cop_centering);
        o
    }

    pub fn optimize(args: &OptimizeArgs) -> Self {
        let mut o = Self::run(&args.run);
        o.set(&["optimizer", "max_updates"], args.max_updates);
        o.set(&["optimizer", "eta"], args.eta);
        o.set(&["optimizer", "delta"], args.delta);
        o.set(&["optimizer", "eps_cost"], args.eps_cost);
        o.set(&["optimizer", "eps_delta"], args.eps_delta);
        o.set(&["optimizer", "max_step"], args.max_step);
        o.flag(&["optimizer", "step_mode"], args.armijo, StepMode::armijo());
        o.flag(&["optimizer", "preconditioner"], args.plain_gradient, Preconditioner::None);
        o
    }

    pub fn replay(args: &ReplayArgs) -> Self {
        let mut o = Self::run(&args.run);
        o.set(&["calibration", "corrupt_seed"], args.corrupt_seed);
        o
    }

    pub fn calibrate(args: &CalibrateArgs) -> Self {
        let mut o = Self::run(&args.run);
        o.set(&["calibration", "corrupt_seed"], args.corrupt_seed);
        o.set(&["calibration", "ratio"], args.ratio);
        o.flag(&["calibration", "fit", "grf_row"], args.grf_row, true);
        o.set(&["calibration", "max_test_mae_grf"], args.max_mae_grf);
        o.set(&["calibration", "max_test_mae_cop"], args.max_mae_cop);
        o
    }
}

fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_config_file(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(flags: Overlay, file: Option<&Path>) -> Result<Self, CliError> {
        let mut v = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        merge(&mut v, Value::Object(flags.0));
        if let Some(path) = file {
            merge(&mut v, read_config_file(path)?);
        }
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.weights.validate().map_err(|e| bad(&e))?;
        self.optimizer.validate().map_err(|e| bad(&e))?;
        self.calibration.weights.validate().map_err(|e| bad(&e))?;
        let c = &self.calibration;
        if !(c.ratio > 0.0 && c.ratio < 1.0) {
            return Err(CliError::Config(format!("calibration ratio must be in (0, 1), got {}", c.ratio)));
        }
        if !(c.max_test_mae_grf > 0.0 && c.max_test_mae_cop > 0.0) {
            return Err(CliError::Config("MAE thresholds must be positive".into()));
        }
        if let Some(p) = &self.robot {
            if !p.is_file() {
                return Err(CliError::Config(format!("robot spec {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The robot spec, with the run seed driving its noise hooks.
    pub fn robot_spec(&self) -> Result<RobotSpec, CliError> {
        let mut spec = match &self.robot {
            None => RobotSpec::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("robot spec {}: {e}", p.display())))?;
                RobotSpec::from_json(&text).map_err(|e| CliError::Config(format!("robot spec {}: {e}", p.display())))?
            }
        };
        spec.seed = self.seed;
        Ok(spec)
    }
}
