use std::path::PathBuf;
use std::process::ExitCode;

use aac_core::adviser::AdviserGains;
use aac_core::cli::{self, Axis};
use aac_core::config::{RunConfig, Strategy};
use aac_core::envs::EnvKind;
use aac_core::stability::ErrorDynamicsModel;
use aac_core::AacError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aac", version, about = "PID-advised actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// TOML run configuration; `AAC_` environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full-size schedule: 51 epochs, 1000-step episodes, width 128.
    #[arg(long)]
    paper_scale: bool,
}

impl RunFlags {
    fn resolve(&self) -> aac_core::Result<RunConfig> {
        let mut c = RunConfig::load(self.config.as_deref())?;
        if self.paper_scale {
            c.apply_paper_scale();
        }
        if let Some(e) = self.env {
            c.env.name = e;
        }
        if let Some(s) = self.strategy {
            c.run.strategy = s;
        }
        if let Some(s) = self.seed {
            c.run.seed = s;
        }
        if let Some(n) = self.epochs {
            c.run.epochs = n;
        }
        if let Some(o) = &self.out {
            c.run.out = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, evaluate it, and write logs plus a checkpoint.
    Train(RunFlags),
    /// Evaluate a saved checkpoint.
    Eval {
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run all strategy × algorithm cells across seeds.
    Matrix(RunFlags),
    /// Routh classification over a grid of effective gains.
    Stability {
        /// Effective proportional gain axis `lo:hi:count`.
        #[arg(long, default_value = "-5:5:11", allow_hyphen_values = true)]
        kp: Axis,
        #[arg(long, default_value = "-5:5:11", allow_hyphen_values = true)]
        kd: Axis,
        #[arg(long, default_value = "-5:5:11", allow_hyphen_values = true)]
        ki: Axis,
        /// Also write time traces for the asymptotic, marginal and unstable cases.
        #[arg(long)]
        traces: bool,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long, default_value = "runs/stability")]
        out: PathBuf,
    },
    /// Spectral radius of I - B and the iterated error norms.
    Contraction {
        /// Text file with one matrix row per line.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, default_value = "runs/contraction")]
        out: PathBuf,
    },
    /// Closed-loop error trajectory for given adviser gains and plant terms.
    StepResponse {
        #[arg(long, default_value_t = 1.0)]
        kp: f64,
        #[arg(long, default_value_t = 0.0)]
        ki: f64,
        #[arg(long, default_value_t = 0.0)]
        kd: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        a0: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        a1: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        disturbance: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        #[arg(long, default_value = "runs/step_response")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> aac_core::Result<()> {
    match cli.command {
        Command::Train(flags) => {
            let config = flags.resolve()?;
            let outcome = cli::cmd_train(&config)?;
            let m = &outcome.metrics;
            println!(
                "{} epochs; success_rate={} median_final_goal_error={} mean_return={} -> {}",
                outcome.log.len(),
                m.success_rate,
                m.median_final_goal_error,
                m.mean_return,
                config.run.out.display()
            );
        }
        Command::Eval { flags, checkpoint } => {
            let config = flags.resolve()?;
            let m = cli::cmd_eval(&config, &checkpoint)?;
            println!(
                "success_rate={} median_final_goal_error={} mean_return={}",
                m.success_rate, m.median_final_goal_error, m.mean_return
            );
        }
        Command::Matrix(flags) => {
            let config = flags.resolve()?;
            let outcome = cli::cmd_matrix(&config)?;
            for s in &outcome.summaries {
                println!(
                    "{:8} {:20} final={:.4} tail={:.4} return={:.2} success={:.2}",
                    s.algorithm.as_str(),
                    s.strategy.as_str(),
                    s.median_final_goal_error,
                    s.median_tail_goal_error,
                    s.mean_return,
                    s.success_rate
                );
            }
        }
        Command::Stability {
            kp,
            kd,
            ki,
            traces,
            stride,
            out,
        } => {
            let o = cli::cmd_stability(kp, kd, ki, traces, stride, &out)?;
            println!("{} grid points, {} disagreements", o.rows, o.disagreements);
        }
        Command::Contraction { matrix, iterations, out } => {
            let b = cli::parse_matrix(&std::fs::read_to_string(&matrix)?)?;
            let decreasing = cli::cmd_contraction(&b, None, iterations, &out)?;
            println!("strictly decreasing: {decreasing}");
        }
        Command::StepResponse {
            kp,
            ki,
            kd,
            a0,
            a1,
            disturbance,
            horizon,
            stride,
            out,
        } => {
            let model = ErrorDynamicsModel {
                a0,
                a1,
                gains: AdviserGains::new(kp, ki, kd)?,
                disturbance,
                horizon,
                ..ErrorDynamicsModel::from_effective(1.0, 1.0, 0.0)?
            };
            cli::cmd_step_response(&model, stride, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (AacError::InvalidConfig { .. } | AacError::NotSquare { .. })) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
