use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::{collect_episode, Actor, ReplayBuffer, Rollout};
use super::learner::{Learner, NetPair};
use super::{epsilon_at, TrainConfig};
use crate::env::EnvConfig;
use crate::tensor::linear_lr;
use crate::{Error, Result};

/// Greedy-play statistics over a set of episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    /// Mean per-episode sum of the global reward.
    pub mean_reward: f64,
    /// Captured evaders over spawned evaders.
    pub capture_rate: f64,
    /// Mean step (1-based) of the first capture, over episodes with one.
    pub mean_steps_to_first_capture: Option<f64>,
}

/// Plays `episodes` episodes with `ε = 0`. Episode seeds are drawn from
/// `seed`, so a fixed seed replays the same worlds.
pub fn evaluate(actor: Actor<'_>, env: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::Contract("evaluation needs at least one episode".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(2);
    let (mut reward, mut captured, mut first_sum, mut first_n) = (0.0, 0usize, 0u64, 0usize);
    for _ in 0..episodes {
        let mut rollout = Rollout::new(env, actor, 0.0, seeds.next_u64())?;
        let mut first = None;
        while !rollout.is_done() {
            let tr = rollout.step()?;
            reward += tr.outcome.global_reward;
            captured += tr.outcome.captures.len();
            if first.is_none() && !tr.outcome.captures.is_empty() {
                first = Some(rollout.world().t());
            }
        }
        if let Some(t) = first {
            first_sum += u64::from(t);
            first_n += 1;
        }
    }
    Ok(EvalSummary {
        episodes,
        mean_reward: reward / episodes as f64,
        capture_rate: captured as f64 / (episodes * env.evaders).max(1) as f64,
        mean_steps_to_first_capture: (first_n > 0).then(|| first_sum as f64 / first_n as f64),
    })
}

/// One line of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub env_step: u64,
    pub train_step: u64,
    pub epsilon: f64,
    pub lr: f64,
    /// Mean loss of the updates since the previous row.
    pub loss: Option<f64>,
    pub eval_mean_reward: f64,
    pub eval_capture_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub nets: NetPair,
    pub metrics: Vec<MetricsRow>,
    pub env_steps: u64,
    pub train_steps: u64,
    pub episodes: u64,
}

/// Collect–replay–update loop. After each episode the learner takes one
/// step once replay holds a full batch; every `eval_every` environment
/// steps (and at the end) a greedy evaluation produces a [`MetricsRow`],
/// passed to `on_row` together with the current networks.
pub fn train<F>(cfg: &TrainConfig, mut on_row: F) -> Result<TrainOutcome>
where
    F: FnMut(&MetricsRow, &NetPair) -> Result<()>,
{
    cfg.validate()?;
    let mut nets = NetPair::new(cfg.algorithm, &cfg.model, &cfg.env, cfg.seed)?;
    let mut learner = Learner::new(&nets);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut episode_seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    episode_seeds.set_stream(3);
    let mut sampler = ChaCha8Rng::seed_from_u64(cfg.seed);
    sampler.set_stream(4);
    let eval_seed = cfg.seed ^ 0x9e37_79b9_7f4a_7c15;

    let mut metrics = Vec::new();
    let (mut env_step, mut episodes) = (0u64, 0u64);
    let mut next_eval = cfg.eval_every;
    let (mut loss_sum, mut loss_n) = (0.0, 0u32);

    while env_step < cfg.total_steps {
        let eps = epsilon_at(env_step, cfg);
        let episode = collect_episode(&cfg.env, nets.actor(), eps, episode_seeds.next_u64())?;
        env_step += episode.len() as u64;
        episodes += 1;
        replay.push(episode);

        if cfg.algorithm.learns() && replay.len() >= cfg.batch_size {
            loss_sum += learner.update(&mut nets, &replay, cfg, env_step, &mut sampler)?;
            loss_n += 1;
        }

        if env_step >= next_eval || env_step >= cfg.total_steps {
            while next_eval <= env_step {
                next_eval += cfg.eval_every;
            }
            let summary = evaluate(nets.actor(), &cfg.env, cfg.eval_episodes, eval_seed)?;
            let row = MetricsRow {
                env_step,
                train_step: learner.train_steps(),
                epsilon: epsilon_at(env_step, cfg),
                lr: linear_lr(cfg.lr, env_step, cfg.total_steps),
                loss: (loss_n > 0).then(|| loss_sum / f64::from(loss_n)),
                eval_mean_reward: summary.mean_reward,
                eval_capture_rate: summary.capture_rate,
            };
            loss_sum = 0.0;
            loss_n = 0;
            on_row(&row, &nets)?;
            metrics.push(row);
        }
    }

    Ok(TrainOutcome { nets, metrics, env_steps: env_step, train_steps: learner.train_steps(), episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{Algorithm, ModelConfig};

    fn smoke(total: u64, algorithm: Algorithm) -> TrainConfig {
        TrainConfig {
            env: EnvConfig::new(7, 2, 1),
            algorithm,
            model: ModelConfig { d_model: 8, heads: 2, depth: 1, rnn_hidden: 8, mixer_embed: 8, hyper_hidden: 8, ..ModelConfig::default() },
            batch_size: 4,
            total_steps: total,
            target_update: 5,
            eval_every: 200,
            eval_episodes: 3,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_returns_initial_networks() {
        let cfg = smoke(0, Algorithm::T3Qmix);
        let out = train(&cfg, |_, _| Ok(())).unwrap();
        assert!(out.metrics.is_empty());
        assert_eq!(out.nets, NetPair::new(cfg.algorithm, &cfg.model, &cfg.env, cfg.seed).unwrap());
    }

    #[test]
    fn short_runs_are_reproducible() {
        for alg in [Algorithm::T3Qmix, Algorithm::Vdn] {
            let cfg = smoke(500, alg);
            let a = train(&cfg, |_, _| Ok(())).unwrap();
            let b = train(&cfg, |_, _| Ok(())).unwrap();
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.nets.online, b.nets.online);
            assert!(a.train_steps > 0);
            assert!(a.metrics.len() >= 2);
            assert_eq!(a.metrics.last().unwrap().env_step, a.env_steps);
        }
    }

    #[test]
    fn random_algorithm_never_updates() {
        let out = train(&smoke(300, Algorithm::Random), |_, _| Ok(())).unwrap();
        assert_eq!(out.train_steps, 0);
        assert!(out.metrics.iter().all(|r| r.loss.is_none()));
    }

    #[test]
    fn evaluation_bounds_and_determinism() {
        let env = EnvConfig::new(13, 8, 4);
        let nets =
            NetPair::new(Algorithm::Qmix, &ModelConfig { rnn_hidden: 16, mixer_embed: 8, hyper_hidden: 8, ..Default::default() }, &env, 0)
                .unwrap();
        let a = evaluate(nets.actor(), &env, 10, 3).unwrap();
        assert!(a.mean_reward.is_finite() && (0.0..=4.0).contains(&a.mean_reward));
        assert_eq!(a, evaluate(nets.actor(), &env, 10, 3).unwrap());
        assert!(evaluate(nets.actor(), &env, 0, 3).is_err());
    }
}
