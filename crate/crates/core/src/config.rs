//! Run configuration: a TOML file with `[run]`, `[env]`, `[adviser.train]`,
//! `[adviser.eval]` and `[sac]` sections, overridable through `AAC_`
//! environment variables whose remaining name is the key path joined by `__`
//! (for example `AAC_SAC__HIDDEN_WIDTH=128` or `AAC_ENV__LINE1D__ACTION_BIAS=0.2`).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adviser::AdviserGains;
use crate::envs::{EnvConfig, EnvKind};
use crate::error::{AacError, Result};
use crate::rl::SacConfig;

pub const ENV_PREFIX: &str = "AAC_";

/// Which phases run with the adviser in the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    None,
    EvalAdviser,
    TrainAdviser,
    TrainEvalAdviser,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::None,
        Strategy::EvalAdviser,
        Strategy::TrainAdviser,
        Strategy::TrainEvalAdviser,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::EvalAdviser => "eval_adviser",
            Strategy::TrainAdviser => "train_adviser",
            Strategy::TrainEvalAdviser => "train_eval_adviser",
        }
    }

    pub fn advises_training(self) -> bool {
        matches!(self, Strategy::TrainAdviser | Strategy::TrainEvalAdviser)
    }

    pub fn advises_evaluation(self) -> bool {
        matches!(self, Strategy::EvalAdviser | Strategy::TrainEvalAdviser)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = AacError;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AacError::InvalidConfig {
                key: "run.strategy".into(),
                reason: format!("unknown strategy `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdviserSection {
    pub train: AdviserGains,
    pub eval: AdviserGains,
}

impl Default for AdviserSection {
    fn default() -> Self {
        Self {
            train: AdviserGains {
                kp: 1.3,
                ki: 0.01,
                kd: 0.01,
            },
            eval: AdviserGains {
                kp: 1.3,
                ki: 0.1,
                kd: 0.1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub strategy: Strategy,
    pub seed: u64,
    pub epochs: usize,
    pub eval_episodes: usize,
    pub matrix_seeds: usize,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            strategy: Strategy::TrainEvalAdviser,
            seed: 0,
            epochs: 20,
            eval_episodes: 10,
            matrix_seeds: 5,
            out: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default = "desk_env")]
    pub env: EnvConfig,
    #[serde(default)]
    pub adviser: AdviserSection,
    #[serde(default = "desk_sac")]
    pub sac: SacConfig,
}

fn desk_env() -> EnvConfig {
    EnvConfig {
        max_steps: 200,
        ..EnvConfig::default()
    }
}

fn desk_sac() -> SacConfig {
    SacConfig {
        hidden_width: 64,
        episodes_per_epoch: 4,
        ..SacConfig::default()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            env: desk_env(),
            adviser: AdviserSection::default(),
            sac: desk_sac(),
        }
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> AacError {
    AacError::InvalidConfig {
        key: key.into(),
        reason: reason.into(),
    }
}

impl RunConfig {
    pub fn for_env(kind: EnvKind) -> Self {
        let mut c = Self::default();
        c.env.name = kind;
        c
    }

    /// Full-size settings: 51 epochs, 1000-step episodes, width-128 networks,
    /// 50 episodes per epoch.
    pub fn apply_paper_scale(&mut self) {
        self.run.epochs = 51;
        self.env.max_steps = 1000;
        self.sac.hidden_width = 128;
        self.sac.episodes_per_epoch = 50;
    }

    /// Parse TOML text, then apply `AAC_` overrides from `vars`.
    pub fn from_toml_str<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let file: toml::Table = toml::from_str(text).map_err(|e| invalid(first_key(&e), e.message()))?;
        let mut table = toml::Table::try_from(RunConfig::default()).map_err(|e| invalid("config", e.to_string()))?;
        merge(&mut table, file);
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let path: Vec<String> = rest.split("__").map(str::to_ascii_lowercase).collect();
            set_path(&mut table, &path, parse_value(&value)).map_err(|r| invalid(path.join("."), r))?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(first_key(&e), e.message()))?;
        config.validate()?;
        Ok(config)
    }

    /// Load from a file (or defaults when `path` is `None`) with the process
    /// environment's overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml_str(&text, std::env::vars())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.sac.validate()?;
        for (key, g) in [("adviser.train", &self.adviser.train), ("adviser.eval", &self.adviser.eval)] {
            g.validate().map_err(|e| match e {
                AacError::InvalidConfig { key: k, reason } => invalid(format!("{key}.{k}"), reason),
                other => other,
            })?;
        }
        if self.run.matrix_seeds == 0 {
            return Err(invalid("run.matrix_seeds", "must be positive"));
        }
        Ok(())
    }

    /// Copy with gains made consistent with the strategy: phases without the
    /// adviser carry identity gains.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if !c.run.strategy.advises_training() {
            c.adviser.train = AdviserGains::IDENTITY;
        }
        if !c.run.strategy.advises_evaluation() {
            c.adviser.eval = AdviserGains::IDENTITY;
        }
        c
    }

    /// Gains for training; `None` selects the adviser-free path.
    pub fn train_gains(&self) -> Option<AdviserGains> {
        match self.run.strategy {
            Strategy::None => None,
            _ => Some(self.resolved().adviser.train),
        }
    }

    pub fn eval_gains(&self) -> Option<AdviserGains> {
        match self.run.strategy {
            Strategy::None => None,
            _ => Some(self.resolved().adviser.eval),
        }
    }
}

fn first_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    msg.split('`').nth(1).unwrap_or("config").to_string()
}

/// Recursively overlay `top` onto `base`; tables merge, other values replace.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, path: &[String], value: toml::Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty override key")?;
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| format!("`{p}` is not a section"))?;
    }
    cur.insert(last.clone(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, vars: &[(&str, &str)]) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, vars.iter().map(|(k, v)| (k.to_string(), v.to_string())))
    }

    #[test]
    fn empty_file_gives_desk_defaults() {
        let c = parse("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.run.epochs, 20);
        assert_eq!(c.env.max_steps, 200);
        assert_eq!(c.sac.gamma, 0.995);
    }

    #[test]
    fn strategy_none_forces_identity_gains() {
        let c = parse("[run]\nstrategy = \"none\"\n", &[]).unwrap().resolved();
        assert!(c.adviser.train.is_identity() && c.adviser.eval.is_identity());
        assert_eq!(c.train_gains(), None);
    }

    #[test]
    fn train_eval_strategy_keeps_table_gains() {
        let c = parse("[env]\nname = \"planar_arm\"\n", &[]).unwrap().resolved();
        assert_eq!(c.adviser.train, AdviserGains { kp: 1.3, ki: 0.01, kd: 0.01 });
        assert_eq!(c.adviser.eval, AdviserGains { kp: 1.3, ki: 0.1, kd: 0.1 });
    }

    #[test]
    fn environment_overrides_apply() {
        let c = parse(
            "[sac]\nhidden_width = 32\n",
            &[
                ("AAC_SAC__HIDDEN_WIDTH", "16"),
                ("AAC_ENV__LINE1D__ACTION_BIAS", "0.2"),
                ("AAC_RUN__STRATEGY", "eval_adviser"),
                ("AAC_ADVISER__EVAL__KI", "0.5"),
                ("HOME", "/root"),
            ],
        )
        .unwrap();
        assert_eq!(c.sac.hidden_width, 16);
        assert_eq!(c.env.line1d.action_bias, 0.2);
        assert_eq!(c.run.strategy, Strategy::EvalAdviser);
        assert_eq!(c.adviser.eval.ki, 0.5);
    }

    #[test]
    fn errors_name_the_offending_key() {
        let err = parse("[sac]\nbogus = 1\n", &[]).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = parse("[env]\nmax_steps = 0\n", &[]).unwrap_err().to_string();
        assert!(err.contains("env.max_steps"), "{err}");
        let err = parse("[adviser.eval]\nkp = -1.0\nki = 0.0\nkd = 0.0\n", &[]).unwrap_err().to_string();
        assert!(err.contains("adviser.eval.kp"), "{err}");
        let err = parse("[run]\nstrategy = \"sometimes\"\n", &[]).unwrap_err().to_string();
        assert!(err.contains("sometimes"), "{err}");
    }

    #[test]
    fn echo_round_trips() {
        let mut c = RunConfig::for_env(EnvKind::Line1d);
        c.env.line1d.action_bias = 0.2;
        c.run.strategy = Strategy::TrainAdviser;
        let text = c.to_toml_string().unwrap();
        assert_eq!(parse(&text, &[]).unwrap(), c);
    }

    #[test]
    fn paper_scale_values() {
        let mut c = RunConfig::default();
        c.apply_paper_scale();
        assert_eq!((c.run.epochs, c.env.max_steps, c.sac.hidden_width), (51, 1000, 128));
    }
}
