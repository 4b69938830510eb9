//! Centralised training with decentralised execution.
//!
//! Pursuers act from their own observations through the shared agent
//! network; the mixer sees the global state only while learning. Episodes
//! are stored whole and replayed in short truncated-BPTT windows that start
//! from the hidden state recorded during the rollout.

mod episode;
mod learner;
mod run;

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

pub use episode::{collect_episode, Actor, Episode, ReplayBuffer, Rollout, StepRecord, Transition};
pub use learner::{make_batch, td_loss, td_loss_graph, td_targets, unroll_q, Batch, BatchStep, Learner, NetPair};
pub use run::{evaluate, train, EvalSummary, MetricsRow, TrainOutcome};

use crate::env::{Action, EnvConfig};
use crate::policy::HiddenTokens;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Agent network × mixer combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    T3Qmix,
    T3Vdn,
    Qmix,
    Vdn,
    /// Uniform random actions; never learns.
    Random,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::T3Qmix, Algorithm::T3Vdn, Algorithm::Qmix, Algorithm::Vdn, Algorithm::Random];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::T3Qmix => "t3-qmix",
            Algorithm::T3Vdn => "t3-vdn",
            Algorithm::Qmix => "qmix",
            Algorithm::Vdn => "vdn",
            Algorithm::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    pub fn uses_transformer(self) -> bool {
        matches!(self, Algorithm::T3Qmix | Algorithm::T3Vdn)
    }

    pub fn uses_qmix(self) -> bool {
        matches!(self, Algorithm::T3Qmix | Algorithm::Qmix)
    }

    pub fn learns(self) -> bool {
        self != Algorithm::Random
    }
}

/// Network sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub depth: usize,
    pub layer_norm: bool,
    pub hidden_tokens: HiddenTokens,
    /// GRU width of the recurrent baseline.
    pub rnn_hidden: usize,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 250,
            heads: 5,
            depth: 2,
            layer_norm: true,
            hidden_tokens: HiddenTokens::Team,
            rnn_hidden: 128,
            mixer_embed: 128,
            hyper_hidden: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub algorithm: Algorithm,
    pub model: ModelConfig,
    pub gamma: f64,
    /// Episodes per update.
    pub batch_size: usize,
    pub lr: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Environment steps to collect.
    pub total_steps: u64,
    /// Learner updates between hard target copies.
    pub target_update: u64,
    /// Episodes kept in replay.
    pub replay_capacity: usize,
    /// Truncated-BPTT window; `None` unrolls whole episodes from t = 0.
    pub bptt_window: Option<usize>,
    pub double_q: bool,
    /// Global gradient-norm ceiling.
    pub grad_clip: Option<f64>,
    /// Environment steps between evaluations.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            algorithm: Algorithm::T3Qmix,
            model: ModelConfig::default(),
            gamma: 0.95,
            batch_size: 32,
            lr: 1e-3,
            epsilon_decay: 1e-4,
            epsilon_min: 0.1,
            total_steps: 1_000_000,
            target_update: 200,
            replay_capacity: 5000,
            bptt_window: Some(5),
            double_q: true,
            grad_clip: Some(10.0),
            eval_every: 10_000,
            eval_episodes: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("discount must lie in [0, 1)");
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= 1.0) {
            return bad("minimum epsilon must lie in (0, 1]");
        }
        if self.epsilon_decay < 0.0 {
            return bad("epsilon decay must be non-negative");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("batch size must be positive and no larger than the replay capacity");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.target_update == 0 || self.eval_every == 0 || self.eval_episodes == 0 {
            return bad("target period, evaluation period and evaluation episodes must be positive");
        }
        if self.bptt_window == Some(0) {
            return bad("BPTT window must be at least 1");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("gradient clip must be positive");
            }
        }
        if self.algorithm.uses_transformer() && (self.model.heads == 0 || !self.model.d_model.is_multiple_of(self.model.heads)) {
            return Err(Error::InvalidConfig(format!(
                "embedding length {} must be a positive multiple of the head count {}",
                self.model.d_model, self.model.heads
            )));
        }
        Ok(())
    }
}

/// `max(ε_min, 1 − decay · step)`.
pub fn epsilon_at(step: u64, cfg: &TrainConfig) -> f64 {
    (1.0 - cfg.epsilon_decay * step as f64).max(cfg.epsilon_min)
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = a;
        }
    }
    best
}

/// Independently per agent: with probability `ε` a uniformly random action
/// (which may coincide with the greedy one), otherwise the greedy action.
pub fn select_actions<R: Rng + ?Sized>(q: &Tensor, epsilon: f64, rng: &mut R) -> Vec<Action> {
    (0..q.rows())
        .map(|k| {
            let a =
                if epsilon > 0.0 && rng.gen::<f64>() < epsilon { rng.gen_range(0..Action::COUNT) } else { greedy_action(q.row_slice(k)) };
            Action::from_index(a).expect("action index in range")
        })
        .collect()
}
