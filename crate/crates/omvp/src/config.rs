//! Run configuration files.
//!
//! A config is a TOML document with three optional tables. Every key has a
//! default, so an empty file describes the standard 13×13 8-vs-4 run:
//!
//! ```toml
//! algorithm = "t3-qmix"
//! seed = 0
//!
//! [scenario]
//! width = 13
//! preset = "8v4"      # or pursuers = 8, evaders = 4
//! pin_strategy = "still"
//!
//! [train]
//! total_steps = 1000000
//!
//! [model]
//! d_model = 250
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use omvp_core::env::{EnvConfig, StrategyTag};
use omvp_core::policy::HiddenTokens;
use omvp_core::trainer::{Algorithm, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub width: usize,
    /// `"8v4"`-style shorthand; overrides `pursuers` and `evaders`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub pursuers: usize,
    pub evaders: usize,
    pub horizon: u32,
    pub obs_size: usize,
    pub intersection_interval: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pin_strategy: Option<String>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            width: env.width,
            preset: None,
            pursuers: env.pursuers,
            evaders: env.evaders,
            horizon: env.horizon,
            obs_size: env.obs_size,
            intersection_interval: env.intersection_interval,
            pin_strategy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub gamma: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub total_steps: u64,
    pub target_update: u64,
    pub replay_capacity: usize,
    /// 0 unrolls whole episodes.
    pub bptt_window: usize,
    pub double_q: bool,
    /// 0 disables clipping.
    pub grad_clip: f64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// Environment steps between intermediate checkpoints; 0 keeps only the final one.
    pub checkpoint_every: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            gamma: t.gamma,
            batch_size: t.batch_size,
            lr: t.lr,
            epsilon_decay: t.epsilon_decay,
            epsilon_min: t.epsilon_min,
            total_steps: t.total_steps,
            target_update: t.target_update,
            replay_capacity: t.replay_capacity,
            bptt_window: t.bptt_window.unwrap_or(0),
            double_q: t.double_q,
            grad_clip: t.grad_clip.unwrap_or(0.0),
            eval_every: t.eval_every,
            eval_episodes: t.eval_episodes,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_model: usize,
    pub heads: usize,
    pub depth: usize,
    pub layer_norm: bool,
    /// `"team"` or `"per-agent"`.
    pub hidden_tokens: String,
    pub rnn_hidden: usize,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            d_model: m.d_model,
            heads: m.heads,
            depth: m.depth,
            layer_norm: m.layer_norm,
            hidden_tokens: hidden_tokens_name(m.hidden_tokens).to_owned(),
            rnn_hidden: m.rnn_hidden,
            mixer_embed: m.mixer_embed,
            hyper_hidden: m.hyper_hidden,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: String,
    pub seed: u64,
    /// Parent of the run directory when `OMVP_RUN_ROOT` is unset.
    pub output_dir: PathBuf,
    pub scenario: ScenarioSection,
    pub train: TrainSection,
    pub model: ModelSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::T3Qmix.name().to_owned(),
            seed: 0,
            output_dir: PathBuf::from("runs"),
            scenario: ScenarioSection::default(),
            train: TrainSection::default(),
            model: ModelSection::default(),
        }
    }
}

fn hidden_tokens_name(h: HiddenTokens) -> &'static str {
    match h {
        HiddenTokens::Team => "team",
        HiddenTokens::PerAgent => "per-agent",
    }
}

/// Splits `"8v4"` into `(8, 4)`.
pub fn parse_preset(s: &str) -> Option<(usize, usize)> {
    let (p, e) = s.trim().split_once(['v', 'V'])?;
    Some((p.parse().ok()?, e.parse().ok()?))
}

impl RunConfig {
    /// Parses TOML text and checks every value.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(p) = &cfg.scenario.preset {
            let (n, m) =
                parse_preset(p).ok_or_else(|| Error::Config(format!("scenario preset {p:?} is not of the form <pursuers>v<evaders>")))?;
            cfg.scenario.pursuers = n;
            cfg.scenario.evaders = m;
            cfg.scenario.preset = None;
        }
        cfg.train_config()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML form; parsing it yields an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        Algorithm::parse(&self.algorithm).ok_or_else(|| {
            let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::Config(format!("unknown algorithm {:?}; expected one of {}", self.algorithm, known.join(", ")))
        })
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let s = &self.scenario;
        let pinned_strategy = match &s.pin_strategy {
            None => None,
            Some(name) => Some(StrategyTag::parse(name).ok_or_else(|| {
                let known: Vec<_> = StrategyTag::ALL.iter().map(|t| t.name()).collect();
                Error::Config(format!("unknown evader strategy {name:?}; expected one of {}", known.join(", ")))
            })?),
        };
        if s.width.is_multiple_of(2) {
            return Err(Error::Config(format!("scenario width must be odd, got {}", s.width)));
        }
        let env = EnvConfig {
            width: s.width,
            pursuers: s.pursuers,
            evaders: s.evaders,
            horizon: s.horizon,
            obs_size: s.obs_size,
            intersection_interval: s.intersection_interval,
            pinned_strategy,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        let hidden_tokens = match m.hidden_tokens.as_str() {
            "team" => HiddenTokens::Team,
            "per-agent" => HiddenTokens::PerAgent,
            other => return Err(Error::Config(format!("hidden_tokens must be \"team\" or \"per-agent\", got {other:?}"))),
        };
        Ok(ModelConfig {
            d_model: m.d_model,
            heads: m.heads,
            depth: m.depth,
            layer_norm: m.layer_norm,
            hidden_tokens,
            rnn_hidden: m.rnn_hidden,
            mixer_embed: m.mixer_embed,
            hyper_hidden: m.hyper_hidden,
        })
    }

    /// The validated trainer configuration.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            env: self.env_config()?,
            algorithm: self.algorithm()?,
            model: self.model_config()?,
            gamma: t.gamma,
            batch_size: t.batch_size,
            lr: t.lr,
            epsilon_decay: t.epsilon_decay,
            epsilon_min: t.epsilon_min,
            total_steps: t.total_steps,
            target_update: t.target_update,
            replay_capacity: t.replay_capacity,
            bptt_window: (t.bptt_window > 0).then_some(t.bptt_window),
            double_q: t.double_q,
            grad_clip: (t.grad_clip > 0.0).then_some(t.grad_clip),
            eval_every: t.eval_every,
            eval_episodes: t.eval_episodes,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pursuer-to-evader ratio.
    pub fn lambda(&self) -> f64 {
        self.scenario.pursuers as f64 / self.scenario.evaders.max(1) as f64
    }
}
