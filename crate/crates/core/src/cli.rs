//! Experiment commands behind the `aac` binary. Each writes CSV files plus a
//! resolved-config echo into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{RunConfig, Strategy};
use crate::envs::{make_env, GoalEnv};
use crate::error::{AacError, Result};
use crate::report::{self, num};
use crate::rl::{evaluate, train, EpochLog, EvalMetrics, SacAgent};
use crate::stability::{
    characteristic_roots, contraction_analysis, max_real_part, routh_classify, simulate_error_dynamics,
    Classification, ErrorDynamicsModel, TRICHOTOMY_CASES,
};

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const EVAL_FILE: &str = "eval_metrics.csv";
pub const CHECKPOINT_FILE: &str = "agent.bin";
pub const MATRIX_FILE: &str = "matrix.csv";

/// Offset separating evaluation episode seeds from the training stream.
const EVAL_SEED_OFFSET: u64 = 1_000_003;

fn write_echo(out: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join(RESOLVED_CONFIG), config.to_toml_string()?)?;
    Ok(())
}

fn new_agent(config: &RunConfig, env: &dyn GoalEnv, seed: u64) -> Result<SacAgent> {
    SacAgent::new(
        config.sac.clone(),
        env.obs_dim() + 2 * env.goal_dim(),
        env.action_low(),
        env.action_high(),
        seed,
    )
}

pub fn train_log_rows(log: &[EpochLog]) -> Vec<Vec<String>> {
    log.iter()
        .map(|l| {
            vec![
                l.epoch.to_string(),
                num(l.mean_return),
                num(l.median_final_goal_error),
                num(l.success_rate),
                num(l.alpha),
                num(l.critic_loss),
                num(l.policy_loss),
                num(l.alpha_loss),
                l.updates.to_string(),
            ]
        })
        .collect()
}

pub fn eval_rows(m: &EvalMetrics) -> Vec<Vec<String>> {
    vec![vec![
        m.episodes.to_string(),
        num(m.success_rate),
        num(m.median_final_goal_error),
        num(m.median_tail_goal_error),
        num(m.mean_return),
        m.empty.to_string(),
    ]]
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<EpochLog>,
    pub metrics: EvalMetrics,
}

/// Train, evaluate and write `train_log.csv`, `eval_metrics.csv`, `agent.bin`
/// and the resolved config into `config.run.out`.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let config = config.resolved();
    let out = config.run.out.clone();
    write_echo(&out, &config)?;
    let mut env = make_env(&config.env)?;
    let mut agent = new_agent(&config, env.as_ref(), config.run.seed)?;
    let log = train(&mut agent, env.as_mut(), config.train_gains(), config.run.epochs)?;
    let metrics = evaluate(
        &mut agent,
        env.as_mut(),
        config.eval_gains(),
        config.run.eval_episodes,
        config.run.seed.wrapping_add(EVAL_SEED_OFFSET),
    )?;
    report::write_file(&out.join(TRAIN_LOG_FILE), &report::TRAIN_LOG, &train_log_rows(&log))?;
    report::write_file(&out.join(EVAL_FILE), &report::EVAL_METRICS, &eval_rows(&metrics))?;
    let mut file = fs::File::create(out.join(CHECKPOINT_FILE))?;
    agent.save(&mut file)?;
    Ok(TrainOutcome { log, metrics })
}

/// Evaluate a saved agent under the configured strategy's evaluation gains.
pub fn cmd_eval(config: &RunConfig, checkpoint: &Path) -> Result<EvalMetrics> {
    config.validate()?;
    let config = config.resolved();
    let out = config.run.out.clone();
    write_echo(&out, &config)?;
    let mut env = make_env(&config.env)?;
    let mut agent = new_agent(&config, env.as_ref(), config.run.seed)?;
    agent.load(&mut fs::File::open(checkpoint)?)?;
    let metrics = evaluate(
        &mut agent,
        env.as_mut(),
        config.eval_gains(),
        config.run.eval_episodes,
        config.run.seed.wrapping_add(EVAL_SEED_OFFSET),
    )?;
    report::write_file(&out.join(EVAL_FILE), &report::EVAL_METRICS, &eval_rows(&metrics))?;
    Ok(metrics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Sac,
    SacHer,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Sac, Algorithm::SacHer];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::SacHer => "sac_her",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub strategy: Strategy,
    pub seed: u64,
    /// Metrics, or the error message of a failed run.
    pub metrics: std::result::Result<EvalMetrics, String>,
}

/// Train one agent under the training gains of `strategies[0]`, then evaluate
/// it once per strategy. All strategies must share that training phase.
pub fn train_and_evaluate(
    base: &RunConfig,
    algorithm: Algorithm,
    strategies: &[Strategy],
    seed: u64,
) -> Result<Vec<EvalMetrics>> {
    let first = *strategies.first().ok_or_else(|| AacError::InvalidConfig {
        key: "strategies".into(),
        reason: "at least one strategy is required".into(),
    })?;
    if let Some(s) = strategies.iter().find(|s| s.advises_training() != first.advises_training()) {
        return Err(AacError::InvalidConfig {
            key: "strategies".into(),
            reason: format!("{} and {} train differently", first.as_str(), s.as_str()),
        });
    }
    let mut config = base.clone();
    config.sac.her = algorithm == Algorithm::SacHer;
    config.run.seed = seed;
    config.run.strategy = first;
    config.validate()?;
    let mut env = make_env(&config.env)?;
    let mut agent = new_agent(&config, env.as_ref(), seed)?;
    train(&mut agent, env.as_mut(), config.train_gains(), config.run.epochs)?;
    strategies
        .iter()
        .map(|&s| {
            config.run.strategy = s;
            evaluate(
                &mut agent,
                env.as_mut(),
                config.eval_gains(),
                config.run.eval_episodes,
                seed.wrapping_add(EVAL_SEED_OFFSET),
            )
        })
        .collect()
}

fn matrix_job(base: &RunConfig, algorithm: Algorithm, advised_training: bool, seed: u64) -> Vec<CellResult> {
    let strategies = if advised_training {
        [Strategy::TrainAdviser, Strategy::TrainEvalAdviser]
    } else {
        [Strategy::None, Strategy::EvalAdviser]
    };
    let results = train_and_evaluate(base, algorithm, &strategies, seed);
    strategies
        .iter()
        .enumerate()
        .map(|(i, &strategy)| CellResult {
            algorithm,
            strategy,
            seed,
            metrics: match &results {
                Ok(m) => Ok(m[i].clone()),
                Err(e) => Err(e.to_string()),
            },
        })
        .collect()
}

/// Summary statistics over the seeds of one cell, ignoring failed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub algorithm: Algorithm,
    pub strategy: Strategy,
    pub completed: usize,
    pub success_rate: f64,
    pub median_final_goal_error: f64,
    pub median_tail_goal_error: f64,
    pub mean_return: f64,
}

pub fn summarise(results: &[CellResult], algorithm: Algorithm, strategy: Strategy) -> CellSummary {
    let ok: Vec<&EvalMetrics> = results
        .iter()
        .filter(|r| r.algorithm == algorithm && r.strategy == strategy)
        .filter_map(|r| r.metrics.as_ref().ok())
        .filter(|m| !m.empty)
        .collect();
    let n = ok.len() as f64;
    CellSummary {
        algorithm,
        strategy,
        completed: ok.len(),
        success_rate: crate::rl::median(ok.iter().map(|m| m.success_rate)),
        median_final_goal_error: crate::rl::median(ok.iter().map(|m| m.median_final_goal_error)),
        median_tail_goal_error: crate::rl::median(ok.iter().map(|m| m.median_tail_goal_error)),
        mean_return: if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|m| m.mean_return).sum::<f64>() / n
        },
    }
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub runs: Vec<CellResult>,
    pub summaries: Vec<CellSummary>,
}

/// Both algorithms × four strategies × `run.matrix_seeds` seeds. Seeds are
/// `run.seed, run.seed + 1, ...`. Strategies that share a training phase share
/// one trained agent; jobs run on the rayon pool.
pub fn cmd_matrix(base: &RunConfig) -> Result<MatrixOutcome> {
    base.validate()?;
    let out = base.run.out.clone();
    write_echo(&out, base)?;
    let seeds: Vec<u64> = (0..base.run.matrix_seeds as u64).map(|i| base.run.seed + i).collect();
    let mut jobs = Vec::new();
    for alg in Algorithm::ALL {
        for advised in [false, true] {
            for &seed in &seeds {
                jobs.push((alg, advised, seed));
            }
        }
    }
    let mut runs: Vec<CellResult> = jobs
        .par_iter()
        .flat_map_iter(|&(alg, advised, seed)| matrix_job(base, alg, advised, seed))
        .collect();
    let order = |r: &CellResult| {
        (
            Algorithm::ALL.iter().position(|a| *a == r.algorithm),
            Strategy::ALL.iter().position(|s| *s == r.strategy),
            r.seed,
        )
    };
    runs.sort_by_key(order);

    let mut summaries = Vec::new();
    for alg in Algorithm::ALL {
        for strategy in Strategy::ALL {
            summaries.push(summarise(&runs, alg, strategy));
        }
    }
    let mut rows = Vec::new();
    for r in &runs {
        let (status, m) = match &r.metrics {
            Ok(m) => ("ok".to_string(), Some(m)),
            Err(e) => (format!("failed: {e}"), None),
        };
        let f = |x: Option<f64>| num(x.unwrap_or(f64::NAN));
        rows.push(vec![
            "run".into(),
            r.algorithm.as_str().into(),
            r.strategy.as_str().into(),
            r.seed.to_string(),
            status,
            f(m.map(|m| m.success_rate)),
            f(m.map(|m| m.median_final_goal_error)),
            f(m.map(|m| m.median_tail_goal_error)),
            f(m.map(|m| m.mean_return)),
        ]);
    }
    for s in &summaries {
        rows.push(vec![
            "summary".into(),
            s.algorithm.as_str().into(),
            s.strategy.as_str().into(),
            String::new(),
            format!("{}/{} ok", s.completed, seeds.len()),
            num(s.success_rate),
            num(s.median_final_goal_error),
            num(s.median_tail_goal_error),
            num(s.mean_return),
        ]);
    }
    report::write_file(&out.join(MATRIX_FILE), &report::MATRIX, &rows)?;
    Ok(MatrixOutcome { runs, summaries })
}

/// Inclusive, evenly spaced axis; `count == 0` yields no points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = AacError;

    /// `lo:hi:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || AacError::InvalidConfig {
            key: "grid".into(),
            reason: format!("expected lo:hi:count, got `{s}`"),
        };
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(bad());
        }
        Ok(Axis { lo, hi, count })
    }
}

/// Tolerance on the largest root real part when matching Routh classes.
pub const ROOT_AGREEMENT_TOL: f64 = 1e-6;

/// Whether a Routh class is consistent with the sign of the largest root real part.
pub fn classification_matches_roots(class: Classification, max_re: f64) -> bool {
    match class {
        Classification::Stable => max_re < 0.0,
        Classification::Unstable => max_re > -ROOT_AGREEMENT_TOL,
        Classification::Marginal => max_re.abs() <= ROOT_AGREEMENT_TOL,
    }
}

#[derive(Debug, Clone)]
pub struct StabilityOutcome {
    pub rows: usize,
    pub disagreements: usize,
    pub traces: Vec<PathBuf>,
}

/// Classify every `(kp', kd', ki)` grid point and optionally write time traces
/// for the named asymptotic / marginal / unstable cases.
pub fn cmd_stability(kp: Axis, kd: Axis, ki: Axis, traces: bool, stride: usize, out: &Path) -> Result<StabilityOutcome> {
    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    let mut disagreements = 0;
    for &p in &kp.points() {
        for &d in &kd.points() {
            for &i in &ki.points() {
                let v = routh_classify(p, d, i);
                let max_re = max_real_part(&characteristic_roots(p, d, i));
                let agree = classification_matches_roots(v.classification, max_re);
                disagreements += usize::from(!agree);
                rows.push(vec![
                    num(p),
                    num(d),
                    num(i),
                    v.classification.to_string(),
                    num(v.routh_first_column[1]),
                    num(v.routh_first_column[2]),
                    num(max_re),
                    agree.to_string(),
                ]);
            }
        }
    }
    let n = rows.len();
    report::write_file(&out.join("stability.csv"), &report::STABILITY_GRID, &rows)?;
    let mut written = Vec::new();
    if traces {
        for (name, [p, d, i]) in TRICHOTOMY_CASES {
            let mut model = ErrorDynamicsModel::from_effective(p, d, i)?;
            model.horizon = 30.0;
            let path = out.join(format!("trace_{name}.csv"));
            write_trace(&path, &model, stride)?;
            written.push(path);
        }
    }
    Ok(StabilityOutcome {
        rows: n,
        disagreements,
        traces: written,
    })
}

fn write_trace(path: &Path, model: &ErrorDynamicsModel, stride: usize) -> Result<()> {
    let traj = simulate_error_dynamics(model)?;
    let rows: Vec<Vec<String>> = traj
        .points
        .iter()
        .step_by(stride.max(1))
        .map(|p| vec![num(p.t), num(p.integral), num(p.error), num(p.rate)])
        .collect();
    report::write_file(path, &report::TRACE, &rows)
}

/// Closed-loop error trajectory for explicit adviser gains and plant terms.
pub fn cmd_step_response(model: &ErrorDynamicsModel, stride: usize, out: &Path) -> Result<()> {
    model.validate()?;
    fs::create_dir_all(out)?;
    write_trace(&out.join("step_response.csv"), model, stride)
}

/// Parse a square matrix from text: one row per line, entries separated by
/// commas or whitespace; blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| AacError::InvalidConfig {
                    key: "matrix".into(),
                    reason: format!("not a number: `{t}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(AacError::InvalidConfig {
            key: "matrix".into(),
            reason: "rows have different lengths".into(),
        });
    }
    if n == 0 || cols != n {
        return Err(AacError::NotSquare { rows: n, cols });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Iterate `e ← (I - B)·e` from `e0` (all ones when `None`) and write the norm
/// sequence plus a one-row summary.
pub fn cmd_contraction(b: &DMatrix<f64>, e0: Option<&[f64]>, iterations: usize, out: &Path) -> Result<bool> {
    let ones = vec![1.0; b.nrows()];
    let report_ = contraction_analysis(b, e0.unwrap_or(&ones), iterations)?;
    fs::create_dir_all(out)?;
    let rows: Vec<Vec<String>> = report_
        .error_norm_sequence
        .iter()
        .enumerate()
        .map(|(k, n)| vec![k.to_string(), num(*n)])
        .collect();
    report::write_file(&out.join("contraction.csv"), &report::CONTRACTION, &rows)?;
    let decreasing = report_.strictly_decreasing(0.0);
    report::write_file(
        &out.join("contraction_summary.csv"),
        &report::CONTRACTION_SUMMARY,
        &[vec![
            num(report_.spectral_radius),
            num(report_.spectral_norm),
            iterations.to_string(),
            decreasing.to_string(),
        ]],
    )?;
    Ok(decreasing)
}
