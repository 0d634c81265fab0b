use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "mfgait", version, about = "Model-free gait tuning on an instrumented biped")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the gait cycle objectives.
    Plan(RunArgs),
    /// Solve every transition on the simulated robot.
    Optimize(OptimizeArgs),
    /// Drive the robot through a stored trajectory and record what it senses.
    Replay(ReplayArgs),
    /// Identify the load-cell parameters from a replayed trajectory.
    Calibrate(CalibrateArgs),
    /// Summarize the artifacts in an output directory.
    Report(ReportArgs),
}

/// Flags shared by every command that builds a run configuration. Values in
/// `--config` win over these.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Robot spec (JSON); the built-in robot when absent.
    #[arg(long)]
    pub robot: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Step length s (mm).
    #[arg(long)]
    pub step: Option<f64>,
    /// Half stance width w (mm).
    #[arg(long)]
    pub width: Option<f64>,
    /// Swing lift height h (mm).
    #[arg(long)]
    pub lift: Option<f64>,
    /// Keep the lifted posture as its own pair of transitions.
    #[arg(long)]
    pub no_skip_lift: bool,
    /// Lateral CoP target of the merged step transition (mm).
    #[arg(long)]
    pub cop_centering: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Use this cycle file instead of planning one.
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    #[arg(long)]
    pub max_updates: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Probe half-width (rad).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub eps_cost: Option<f64>,
    #[arg(long)]
    pub eps_delta: Option<f64>,
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Backtracking line search instead of a fixed step.
    #[arg(long)]
    pub armijo: bool,
    /// Plain gradient steps, without the Gauss-Newton preconditioner.
    #[arg(long)]
    pub plain_gradient: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Trajectory log; `<out>/trajectory.jsonl` when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Cycle file; `<out>/cycle.json`, else a freshly planned cycle.
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    /// Replace the true cell parameters with a seeded corruption.
    #[arg(long)]
    pub corrupt_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Trajectory log; `<out>/trajectory.jsonl` when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Reference log to use instead of capturing one.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub corrupt_seed: Option<u64>,
    /// Fraction of samples used for fitting.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Add the GRF row to the initial-guess regression.
    #[arg(long)]
    pub grf_row: bool,
    /// Largest acceptable post-fit test GRF MAE (N).
    #[arg(long)]
    pub max_mae_grf: Option<f64>,
    /// Largest acceptable post-fit test CoP MAE (mm).
    #[arg(long)]
    pub max_mae_cop: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}
