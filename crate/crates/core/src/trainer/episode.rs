use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::select_actions;
use crate::env::{Action, EnvConfig, StepOutcome, StrategyTag, WorldState};
use crate::policy::{push_features, team_inputs, AgentNet, Evaluation, Pose};
use crate::tensor::{ParamStore, Tensor};
use crate::Result;

/// Everything replay needs about one time step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    /// Per agent, the `E` window followed by the `B` window.
    pub observations: Vec<u8>,
    pub poses: Vec<Pose>,
    /// Global state planes as 0/1 bytes.
    pub state: Vec<u8>,
    /// Recurrent state entering this step, rounded to `f32`.
    pub hidden: Vec<f32>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub captures: usize,
    pub done: bool,
}

impl StepRecord {
    /// Appends the `N × feature_len` agent inputs, row-major.
    pub fn features_into(&self, obs_size: usize, width: usize, out: &mut Vec<f64>) {
        let m2 = obs_size * obs_size;
        for (k, &pose) in self.poses.iter().enumerate() {
            let o = &self.observations[2 * m2 * k..2 * m2 * (k + 1)];
            push_features(&o[..m2], &o[m2..], pose, width, out);
        }
    }

    pub fn state_into(&self, out: &mut Vec<f64>) {
        out.extend(self.state.iter().map(|&v| v as f64));
    }
}

/// One complete rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub seed: u64,
    pub strategy: StrategyTag,
    pub n_agents: usize,
    pub obs_size: usize,
    pub width: usize,
    pub steps: Vec<StepRecord>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.global_reward).sum()
    }

    /// Every step pays out exactly one unit per capture, split among agents.
    pub fn conserves_rewards(&self) -> bool {
        self.steps.iter().all(|s| s.rewards.iter().sum::<f64>() == s.global_reward && s.global_reward == s.captures as f64)
    }
}

/// Who chooses the pursuers' actions.
#[derive(Clone, Copy, Debug)]
pub enum Actor<'a> {
    Net { agent: &'a AgentNet, params: &'a ParamStore },
    Uniform,
}

/// What one call to [`Rollout::step`] produced.
#[derive(Clone, Debug)]
pub struct Transition {
    pub record: StepRecord,
    pub outcome: StepOutcome,
    /// Network outputs behind the chosen actions (`None` for uniform play).
    pub evaluation: Option<Evaluation>,
}

/// A live episode driven by an [`Actor`].
#[derive(Clone, Debug)]
pub struct Rollout<'a> {
    world: WorldState,
    actor: Actor<'a>,
    hidden: Tensor,
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl<'a> Rollout<'a> {
    /// Fresh world from `seed`; action noise comes from a separate stream of
    /// the same seed, and the recurrent state starts at zero.
    pub fn new(env: &EnvConfig, actor: Actor<'a>, epsilon: f64, seed: u64) -> Result<Self> {
        let world = WorldState::reset(env, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let hidden = match actor {
            Actor::Net { agent, .. } => agent.initial_hidden(1, env.pursuers),
            Actor::Uniform => Tensor::zeros(&[0, 0]),
        };
        Ok(Self { world, actor, hidden, epsilon, rng })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn hidden(&self) -> &Tensor {
        &self.hidden
    }

    pub fn is_done(&self) -> bool {
        self.world.is_done()
    }

    pub fn step(&mut self) -> Result<Transition> {
        let (obs, poses) = team_inputs(&self.world)?;
        let n = poses.len();
        let mut observations = Vec::with_capacity(obs.iter().map(|o| 2 * o.evaders.len()).sum());
        for o in &obs {
            observations.extend_from_slice(&o.evaders);
            observations.extend_from_slice(&o.obstacles);
        }
        let state: Vec<u8> = self.world.global_state().iter().map(|&v| v as u8).collect();
        let hidden: Vec<f32> = self.hidden.data().iter().map(|&v| v as f32).collect();

        let (actions, evaluation) = match self.actor {
            Actor::Net { agent, params } => {
                let mut feats = Vec::new();
                let width = self.world.map().width();
                let m2 = obs.first().map_or(0, |o| o.size * o.size);
                for (k, &pose) in poses.iter().enumerate() {
                    let o = &observations[2 * m2 * k..2 * m2 * (k + 1)];
                    push_features(&o[..m2], &o[m2..], pose, width, &mut feats);
                }
                let features = Tensor::matrix(n, feats.len() / n.max(1), feats)?;
                let ev = agent.evaluate(params, &features, &self.hidden)?;
                let actions = select_actions(&ev.q, self.epsilon, &mut self.rng);
                self.hidden = ev.hidden.clone();
                (actions, Some(ev))
            }
            Actor::Uniform => {
                let actions = (0..n).map(|_| Action::from_index(self.rng.gen_range(0..Action::COUNT)).expect("in range")).collect();
                (actions, None)
            }
        };

        let outcome = self.world.step(&actions)?;
        let record = StepRecord {
            observations,
            poses,
            state,
            hidden,
            actions,
            rewards: outcome.per_agent_reward.clone(),
            global_reward: outcome.global_reward,
            captures: outcome.captures.len(),
            done: outcome.done,
        };
        Ok(Transition { record, outcome, evaluation })
    }
}

/// Rolls one episode to completion.
pub fn collect_episode(env: &EnvConfig, actor: Actor<'_>, epsilon: f64, seed: u64) -> Result<Episode> {
    let mut rollout = Rollout::new(env, actor, epsilon, seed)?;
    let mut steps = Vec::with_capacity(env.horizon as usize);
    while !rollout.is_done() {
        steps.push(rollout.step()?.record);
    }
    Ok(Episode { seed, strategy: rollout.world().strategy(), n_agents: env.pursuers, obs_size: env.obs_size, width: env.width, steps })
}

/// First-in first-out store of whole episodes.
#[derive(Clone, Debug, Default)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<Episode>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, episodes: VecDeque::with_capacity(capacity.min(1024)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Appends, evicting the oldest episode once full.
    pub fn push(&mut self, episode: Episode) {
        if self.capacity == 0 {
            return;
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn get(&self, i: usize) -> Option<&Episode> {
        self.episodes.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter()
    }

    /// `count` distinct episodes, uniformly (all of them if fewer are held).
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Episode> {
        let k = count.min(self.len());
        sample(rng, self.len(), k).into_iter().map(|i| &self.episodes[i]).collect()
    }
}
