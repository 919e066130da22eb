//! Run configuration: a flat key-value text file with defaults for every
//! key, so an empty file is a runnable config. Unknown keys are errors.

use digrad_core::agent::{Algorithm, BootstrapMode};
use digrad_core::critic::CriticMode;
use digrad_core::env::KinematicTree;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}': {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("key '{key}': {msg}")]
    Invalid { key: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("environment tree: {0}")]
    Tree(#[from] digrad_core::env::TreeError),
}

/// The five experiment settings plus their mapping onto the core algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmTag {
    DigradSingleHeuristic,
    DigradSingle,
    DigradMultiHeuristic,
    DigradMulti,
    Ddpg,
}

impl AlgorithmTag {
    pub const ALL: [AlgorithmTag; 5] = [
        AlgorithmTag::DigradSingleHeuristic,
        AlgorithmTag::DigradSingle,
        AlgorithmTag::DigradMultiHeuristic,
        AlgorithmTag::DigradMulti,
        AlgorithmTag::Ddpg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmTag::DigradSingleHeuristic => "digrad-single-heuristic",
            AlgorithmTag::DigradSingle => "digrad-single",
            AlgorithmTag::DigradMultiHeuristic => "digrad-multi-heuristic",
            AlgorithmTag::DigradMulti => "digrad-multi",
            AlgorithmTag::Ddpg => "ddpg",
        }
    }

    pub fn algorithm(self) -> Algorithm {
        match self {
            AlgorithmTag::DigradSingleHeuristic => Algorithm::DiGrad {
                critic: CriticMode::Single,
                heuristic: true,
            },
            AlgorithmTag::DigradSingle => Algorithm::DiGrad {
                critic: CriticMode::Single,
                heuristic: false,
            },
            AlgorithmTag::DigradMultiHeuristic => Algorithm::DiGrad {
                critic: CriticMode::Multi,
                heuristic: true,
            },
            AlgorithmTag::DigradMulti => Algorithm::DiGrad {
                critic: CriticMode::Multi,
                heuristic: false,
            },
            AlgorithmTag::Ddpg => Algorithm::Ddpg,
        }
    }
}

impl fmt::Display for AlgorithmTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = AlgorithmTag::ALL.iter().map(|t| t.as_str()).collect();
                format!("unknown algorithm '{s}' (valid: {})", names.join(", "))
            })
    }
}

/// Which network gets which learning rate. The paper's wording reads as
/// actor 0.001 / critic 0.0001; the conventional assignment is the inverse.
/// Both ship as presets, with explicit keys overriding either.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrPreset {
    #[default]
    Paper,
    DdpgConvention,
}

impl LrPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            LrPreset::Paper => "paper",
            LrPreset::DdpgConvention => "ddpg-convention",
        }
    }

    pub fn rates(self) -> (f64, f64) {
        match self {
            LrPreset::Paper => (0.001, 0.0001),
            LrPreset::DdpgConvention => (0.0001, 0.001),
        }
    }
}

/// Where the environment tree comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvSource {
    Builtin(String),
    File(PathBuf),
}

impl EnvSource {
    pub fn load(&self) -> Result<KinematicTree, ConfigError> {
        match self {
            EnvSource::Builtin(name) => {
                KinematicTree::builtin(name).ok_or_else(|| ConfigError::Invalid {
                    key: "env".into(),
                    msg: format!(
                        "unknown builtin environment '{name}' (valid: {})",
                        KinematicTree::builtin_names().join(", ")
                    ),
                })
            }
            EnvSource::File(path) => Ok(KinematicTree::from_file(path)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: EnvSource,
    pub algorithm: AlgorithmTag,
    /// Settings the `matrix` verb sweeps over.
    pub settings: Vec<AlgorithmTag>,
    pub episodes: u32,
    pub steps_per_episode: u32,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lr_preset: LrPreset,
    pub actor_lr: Option<f64>,
    pub critic_lr: Option<f64>,
    pub rmsprop_rho: f64,
    pub rmsprop_eps: f64,
    pub hidden: (usize, usize),
    pub noise_sigma_scale: f64,
    pub noise_decay: f64,
    pub bootstrap: BootstrapMode,
    pub reward_success_bonus: f64,
    pub reward_all_tasks_bonus: f64,
    pub reward_penalty_coef: f64,
    pub reward_reach_frac: f64,
    pub eval_every: u32,
    pub eval_episodes: u32,
    pub seeds: Vec<u64>,
    pub outdir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvSource::Builtin("mini-4link".into()),
            algorithm: AlgorithmTag::DigradSingleHeuristic,
            settings: AlgorithmTag::ALL.to_vec(),
            episodes: 2000,
            steps_per_episode: 200,
            batch_size: 64,
            buffer_capacity: 1_000_000,
            gamma: 0.99,
            tau: 0.001,
            lr_preset: LrPreset::Paper,
            actor_lr: None,
            critic_lr: None,
            rmsprop_rho: 0.9,
            rmsprop_eps: 1e-8,
            hidden: (400, 300),
            noise_sigma_scale: 0.3,
            noise_decay: 0.995,
            bootstrap: BootstrapMode::PerTaskHead,
            reward_success_bonus: 0.5,
            reward_all_tasks_bonus: 1.0,
            reward_penalty_coef: 1.0,
            reward_reach_frac: 0.02,
            eval_every: 50,
            eval_episodes: 20,
            seeds: vec![1, 2, 3],
            outdir: PathBuf::from("runs"),
        }
    }
}

impl TrainConfig {
    /// Actor learning rate after applying the preset and any override.
    pub fn actor_learning_rate(&self) -> f64 {
        self.actor_lr.unwrap_or(self.lr_preset.rates().0)
    }

    /// Critic learning rate after applying the preset and any override.
    pub fn critic_learning_rate(&self) -> f64 {
        self.critic_lr.unwrap_or(self.lr_preset.rates().1)
    }

    /// Output directory, honoring the `DIGRAD_OUT` root override.
    pub fn resolved_outdir(&self) -> PathBuf {
        match std::env::var_os("DIGRAD_OUT") {
            Some(root) => PathBuf::from(root).join(&self.outdir),
            None => self.outdir.clone(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_str(&text)?;
        // Relative tree paths resolve against the config file's directory.
        if let EnvSource::File(ref tree_path) = cfg.env {
            if tree_path.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.env = EnvSource::File(dir.join(tree_path));
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut tokens = content.split_whitespace();
            let key = tokens.next().unwrap().to_string();
            let values: Vec<&str> = tokens.collect();
            let bad = |msg: String| ConfigError::BadValue {
                line,
                key: key.clone(),
                msg,
            };
            let one = || -> Result<&str, ConfigError> {
                if values.len() == 1 {
                    Ok(values[0])
                } else {
                    Err(bad(format!("expected one value, got {}", values.len())))
                }
            };
            macro_rules! parse_one {
                ($ty:ty) => {
                    one()?.parse::<$ty>().map_err(|e| bad(e.to_string()))?
                };
            }
            match key.as_str() {
                "env" => cfg.env = EnvSource::Builtin(one()?.to_string()),
                "include" => cfg.env = EnvSource::File(PathBuf::from(one()?)),
                "algorithm" => cfg.algorithm = one()?.parse().map_err(|e: String| bad(e))?,
                "settings" => {
                    let parsed: Result<Vec<AlgorithmTag>, String> =
                        values.iter().map(|v| v.parse()).collect();
                    cfg.settings = parsed.map_err(|e| bad(e))?;
                    if cfg.settings.is_empty() {
                        return Err(bad("need at least one setting".into()));
                    }
                }
                "episodes" => cfg.episodes = parse_one!(u32),
                "steps_per_episode" => cfg.steps_per_episode = parse_one!(u32),
                "batch_size" => cfg.batch_size = parse_one!(usize),
                "buffer_capacity" => cfg.buffer_capacity = parse_one!(usize),
                "gamma" => cfg.gamma = parse_one!(f64),
                "tau" => cfg.tau = parse_one!(f64),
                "lr_preset" => {
                    cfg.lr_preset = match one()? {
                        "paper" => LrPreset::Paper,
                        "ddpg-convention" => LrPreset::DdpgConvention,
                        other => {
                            return Err(bad(format!(
                                "unknown preset '{other}' (valid: paper, ddpg-convention)"
                            )))
                        }
                    }
                }
                "actor_lr" => cfg.actor_lr = Some(parse_one!(f64)),
                "critic_lr" => cfg.critic_lr = Some(parse_one!(f64)),
                "rmsprop_rho" => cfg.rmsprop_rho = parse_one!(f64),
                "rmsprop_eps" => cfg.rmsprop_eps = parse_one!(f64),
                "hidden" => {
                    if values.len() != 2 {
                        return Err(bad("expected two layer sizes".into()));
                    }
                    cfg.hidden = (
                        values[0].parse().map_err(|_| bad("bad layer size".into()))?,
                        values[1].parse().map_err(|_| bad("bad layer size".into()))?,
                    );
                }
                "noise_sigma_scale" => cfg.noise_sigma_scale = parse_one!(f64),
                "noise_decay" => cfg.noise_decay = parse_one!(f64),
                "bootstrap" => {
                    cfg.bootstrap = match one()? {
                        "per-task" => BootstrapMode::PerTaskHead,
                        "summed" => BootstrapMode::SummedHeads,
                        other => {
                            return Err(bad(format!(
                                "unknown bootstrap mode '{other}' (valid: per-task, summed)"
                            )))
                        }
                    }
                }
                "reward_success_bonus" => cfg.reward_success_bonus = parse_one!(f64),
                "reward_all_tasks_bonus" => cfg.reward_all_tasks_bonus = parse_one!(f64),
                "reward_penalty_coef" => cfg.reward_penalty_coef = parse_one!(f64),
                "reward_reach_frac" => cfg.reward_reach_frac = parse_one!(f64),
                "eval_every" => cfg.eval_every = parse_one!(u32),
                "eval_episodes" => cfg.eval_episodes = parse_one!(u32),
                "seeds" => {
                    let parsed: Result<Vec<u64>, _> = values.iter().map(|v| v.parse()).collect();
                    cfg.seeds = parsed.map_err(|_| bad("seeds must be integers".into()))?;
                    if cfg.seeds.is_empty() {
                        return Err(bad("need at least one seed".into()));
                    }
                }
                "outdir" => cfg.outdir = PathBuf::from(one()?),
                _ => return Err(ConfigError::UnknownKey { line, key }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, msg: &str| {
            Err(ConfigError::Invalid {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.steps_per_episode == 0 {
            return invalid("steps_per_episode", "must be > 0");
        }
        if self.batch_size == 0 {
            return invalid("batch_size", "must be > 0");
        }
        if self.buffer_capacity < self.batch_size {
            return invalid("buffer_capacity", "must be >= batch_size");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return invalid("gamma", "must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return invalid("tau", "must be in [0, 1]");
        }
        if self.actor_learning_rate() <= 0.0 {
            return invalid("actor_lr", "must be > 0");
        }
        if self.critic_learning_rate() <= 0.0 {
            return invalid("critic_lr", "must be > 0");
        }
        if !(self.rmsprop_rho > 0.0 && self.rmsprop_rho < 1.0) {
            return invalid("rmsprop_rho", "must be in (0, 1)");
        }
        if self.rmsprop_eps <= 0.0 {
            return invalid("rmsprop_eps", "must be > 0");
        }
        if self.hidden.0 == 0 || self.hidden.1 == 0 {
            return invalid("hidden", "layer sizes must be > 0");
        }
        if self.noise_sigma_scale < 0.0 {
            return invalid("noise_sigma_scale", "must be >= 0");
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return invalid("noise_decay", "must be in (0, 1]");
        }
        if self.reward_reach_frac <= 0.0 {
            return invalid("reward_reach_frac", "must be > 0");
        }
        if self.reward_penalty_coef <= 0.0 {
            return invalid("reward_penalty_coef", "must be > 0");
        }
        if self.eval_every == 0 {
            return invalid("eval_every", "must be > 0");
        }
        if self.eval_episodes == 0 {
            return invalid("eval_episodes", "must be > 0");
        }
        Ok(())
    }

    /// Render back into the config-file format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        match &self.env {
            EnvSource::Builtin(name) => out.push_str(&format!("env {name}\n")),
            EnvSource::File(path) => out.push_str(&format!("include {}\n", path.display())),
        }
        out.push_str(&format!("algorithm {}\n", self.algorithm));
        let settings: Vec<&str> = self.settings.iter().map(|s| s.as_str()).collect();
        out.push_str(&format!("settings {}\n", settings.join(" ")));
        out.push_str(&format!("episodes {}\n", self.episodes));
        out.push_str(&format!("steps_per_episode {}\n", self.steps_per_episode));
        out.push_str(&format!("batch_size {}\n", self.batch_size));
        out.push_str(&format!("buffer_capacity {}\n", self.buffer_capacity));
        out.push_str(&format!("gamma {}\n", self.gamma));
        out.push_str(&format!("tau {}\n", self.tau));
        out.push_str(&format!("lr_preset {}\n", self.lr_preset.as_str()));
        if let Some(lr) = self.actor_lr {
            out.push_str(&format!("actor_lr {lr}\n"));
        }
        if let Some(lr) = self.critic_lr {
            out.push_str(&format!("critic_lr {lr}\n"));
        }
        out.push_str(&format!("rmsprop_rho {}\n", self.rmsprop_rho));
        out.push_str(&format!("rmsprop_eps {}\n", self.rmsprop_eps));
        out.push_str(&format!("hidden {} {}\n", self.hidden.0, self.hidden.1));
        out.push_str(&format!("noise_sigma_scale {}\n", self.noise_sigma_scale));
        out.push_str(&format!("noise_decay {}\n", self.noise_decay));
        let bootstrap = match self.bootstrap {
            BootstrapMode::PerTaskHead => "per-task",
            BootstrapMode::SummedHeads => "summed",
        };
        out.push_str(&format!("bootstrap {bootstrap}\n"));
        out.push_str(&format!("reward_success_bonus {}\n", self.reward_success_bonus));
        out.push_str(&format!("reward_all_tasks_bonus {}\n", self.reward_all_tasks_bonus));
        out.push_str(&format!("reward_penalty_coef {}\n", self.reward_penalty_coef));
        out.push_str(&format!("reward_reach_frac {}\n", self.reward_reach_frac));
        out.push_str(&format!("eval_every {}\n", self.eval_every));
        out.push_str(&format!("eval_episodes {}\n", self.eval_episodes));
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("seeds {}\n", seeds.join(" ")));
        out.push_str(&format!("outdir {}\n", self.outdir.display()));
        out
    }
}
