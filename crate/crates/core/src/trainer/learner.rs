use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::{Actor, Episode, ReplayBuffer};
use super::{greedy_action, Algorithm, ModelConfig, TrainConfig};
use crate::env::EnvConfig;
use crate::mixer::{Mixer, QmixConfig, QmixMixer};
use crate::policy::{feature_len, AgentNet, RecurrentConfig, RecurrentPolicy, TransformerConfig, TransformerPolicy};
use crate::tensor::{linear_lr, AdamState, Gradients, Graph, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Network structure with its online and target parameters. Both stores hold
/// the agent network (`agent.*`) and the mixer (`mixer.*`).
#[derive(Clone, Debug, PartialEq)]
pub struct NetPair {
    pub algorithm: Algorithm,
    pub agent: AgentNet,
    pub mixer: Mixer,
    pub online: ParamStore,
    pub target: ParamStore,
    pub n_agents: usize,
}

impl NetPair {
    /// Freshly initialised networks for `env`; the target starts as a copy.
    /// The uniform-random algorithm carries a small recurrent network so its
    /// checkpoints share the common layout.
    pub fn new(algorithm: Algorithm, model: &ModelConfig, env: &EnvConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut online = ParamStore::new();
        let input_dim = feature_len(env.obs_size);
        let agent = if algorithm.uses_transformer() {
            let cfg = TransformerConfig {
                input_dim,
                d_model: model.d_model,
                heads: model.heads,
                depth: model.depth,
                layer_norm: model.layer_norm,
                hidden_tokens: model.hidden_tokens,
            };
            AgentNet::Transformer(TransformerPolicy::new(cfg, &mut online, "agent", &mut rng)?)
        } else {
            let cfg = RecurrentConfig { input_dim, hidden: model.rnn_hidden };
            AgentNet::Recurrent(RecurrentPolicy::new(cfg, &mut online, "agent", &mut rng)?)
        };
        let mixer = if algorithm.uses_qmix() {
            let cfg = QmixConfig {
                state_dim: env.state_len(),
                n_agents: env.pursuers,
                embed: model.mixer_embed,
                hyper_hidden: model.hyper_hidden,
            };
            Mixer::Qmix(QmixMixer::new(cfg, &mut online, "mixer", &mut rng)?)
        } else {
            Mixer::Vdn
        };
        let target = online.clone();
        Ok(Self { algorithm, agent, mixer, online, target, n_agents: env.pursuers })
    }

    /// Hard copy of the online parameters into the target.
    pub fn update_targets(&mut self) {
        self.target.copy_from(&self.online).expect("target mirrors the online layout");
    }

    /// Recurrent state shape of one sample.
    pub fn hidden_shape(&self) -> (usize, usize) {
        (self.agent.hidden_rows(self.n_agents), self.agent.hidden_dim())
    }

    /// Acting policy backed by the online parameters.
    pub fn actor(&self) -> Actor<'_> {
        if self.algorithm.learns() {
            Actor::Net { agent: &self.agent, params: &self.online }
        } else {
            Actor::Uniform
        }
    }
}

/// Inputs of one time slice of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStep {
    /// `(B·N) × feature_len`.
    pub features: Tensor,
    /// `B × state_len`.
    pub state: Tensor,
    /// `B·N` action indices.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// No bootstrap beyond this step (episode end, or padding).
    pub terminal: Vec<bool>,
    /// 1 for real steps inside the window, 0 for padding.
    pub mask: Vec<f64>,
}

/// Time-major slices of `B` episode windows. `steps` holds one slice more
/// than the window so the last step can bootstrap.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub n_agents: usize,
    pub window: usize,
    pub steps: Vec<BatchStep>,
    /// Recurrent state entering the first slice.
    pub hidden0: Tensor,
}

/// Windows of length `window` starting at `starts[b]` in `episodes[b]`.
/// Steps past an episode's end repeat its last step with zero mask.
/// `hidden` is the per-sample recurrent state shape `(rows, dim)`; episodes
/// recorded without one start from zeros.
pub fn make_batch(episodes: &[&Episode], starts: &[usize], window: usize, hidden: (usize, usize)) -> Result<Batch> {
    let first = episodes.first().ok_or_else(|| Error::Contract("empty batch".into()))?;
    if starts.len() != episodes.len() || window == 0 {
        return Err(Error::Contract(format!("{} episodes, {} starts, window {window}", episodes.len(), starts.len())));
    }
    let (n, m, w) = (first.n_agents, first.obs_size, first.width);
    for (e, &s) in episodes.iter().zip(starts) {
        if e.n_agents != n || e.obs_size != m || e.width != w || s >= e.len() {
            return Err(Error::Contract("batch episodes must share a scenario and windows must start inside them".into()));
        }
    }
    let size = episodes.len();
    let f = feature_len(m);
    let mut steps = Vec::with_capacity(window + 1);
    for t in 0..=window {
        let mut features = Vec::with_capacity(size * n * f);
        let mut state = Vec::with_capacity(size * 3 * w * w);
        let mut actions = Vec::with_capacity(size * n);
        let mut rewards = Vec::with_capacity(size);
        let mut terminal = Vec::with_capacity(size);
        let mut mask = Vec::with_capacity(size);
        for (e, &s) in episodes.iter().zip(starts) {
            let idx = s + t;
            let real = idx < e.len();
            let rec = &e.steps[idx.min(e.len() - 1)];
            rec.features_into(m, w, &mut features);
            rec.state_into(&mut state);
            actions.extend(rec.actions.iter().map(|a| a.index()));
            rewards.push(if real { rec.global_reward } else { 0.0 });
            terminal.push(!real || rec.done);
            mask.push(if real && t < window { 1.0 } else { 0.0 });
        }
        steps.push(BatchStep {
            features: Tensor::matrix(size * n, f, features)?,
            state: Tensor::matrix(size, 3 * w * w, state)?,
            actions,
            rewards,
            terminal,
            mask,
        });
    }
    let (h_rows, h_dim) = hidden;
    let mut h0 = Vec::with_capacity(size * h_rows * h_dim);
    for (e, &s) in episodes.iter().zip(starts) {
        let stored = &e.steps[s].hidden;
        if stored.is_empty() {
            h0.resize(h0.len() + h_rows * h_dim, 0.0);
        } else if stored.len() == h_rows * h_dim {
            h0.extend(stored.iter().map(|&v| v as f64));
        } else {
            return Err(Error::Shape(format!("stored hidden state has {} values, expected {}", stored.len(), h_rows * h_dim)));
        }
    }
    let hidden0 = Tensor::matrix(size * h_rows, h_dim, h0)?;
    Ok(Batch { size, n_agents: n, window, steps, hidden0 })
}

/// Unrolls the agent network over the first `len` slices, returning each
/// slice's `(B·N) × 5` action values.
pub fn unroll_q(agent: &AgentNet, store: &ParamStore, g: &mut Graph, batch: &Batch, len: usize) -> Result<Vec<Var>> {
    let mut h = g.input(batch.hidden0.clone());
    let mut qs = Vec::with_capacity(len);
    for step in &batch.steps[..len] {
        let x = g.input(step.features.clone());
        let out = agent.forward(g, store, x, h, batch.size, batch.n_agents)?;
        qs.push(out.q);
        h = out.hidden;
    }
    Ok(qs)
}

fn mixed(
    mixer: &Mixer,
    store: &ParamStore,
    g: &mut Graph,
    q: Var,
    actions: &[usize],
    state: &Tensor,
    size: usize,
    n: usize,
) -> Result<Var> {
    let chosen = g.pick_cols(q, actions)?;
    let chosen = g.reshape(chosen, vec![size, n])?;
    let s = g.input(state.clone());
    mixer.forward(g, store, chosen, s)
}

/// `y_t = r_t + γ·Q_total^target(s_{t+1}, a*)` for every slice of the window
/// (time-major, `window · B` values), with `y_t = r_t` at terminal steps.
/// `a*` is the online greedy action under double-Q, the target's otherwise.
pub fn td_targets(nets: &NetPair, batch: &Batch, gamma: f64, double_q: bool) -> Result<Vec<f64>> {
    if !double_q {
        return targets_with(nets, batch, gamma, None);
    }
    let mut g = Graph::new();
    let qs = unroll_q(&nets.agent, &nets.online, &mut g, batch, batch.window + 1)?;
    let online: Vec<&Tensor> = qs.iter().map(|&q| g.value(q)).collect();
    targets_with(nets, batch, gamma, Some(&online))
}

/// Targets given the online action values of every slice (`None` selects
/// the bootstrap action with the target network itself).
fn targets_with(nets: &NetPair, batch: &Batch, gamma: f64, online_q: Option<&[&Tensor]>) -> Result<Vec<f64>> {
    let (b, n, w) = (batch.size, batch.n_agents, batch.window);
    let mut tg = Graph::new();
    let target_q = unroll_q(&nets.agent, &nets.target, &mut tg, batch, w + 1)?;
    let mut y = Vec::with_capacity(w * b);
    for t in 0..w {
        let step = &batch.steps[t];
        let next = &batch.steps[t + 1];
        let best: Vec<usize> = {
            let chooser = match online_q {
                Some(q) => q[t + 1],
                None => tg.value(target_q[t + 1]),
            };
            (0..b * n).map(|r| greedy_action(chooser.row_slice(r))).collect()
        };
        let boot = mixed(&nets.mixer, &nets.target, &mut tg, target_q[t + 1], &best, &next.state, b, n)?;
        let boot = tg.value(boot).data();
        for i in 0..b {
            let future = if step.terminal[i] { 0.0 } else { gamma * boot[i] };
            y.push(step.rewards[i] + future);
        }
    }
    Ok(y)
}

/// Masked mean squared TD error over the window, built on `g` from the
/// online parameters in `store`. `targets` come from [`td_targets`].
pub fn td_loss_graph(agent: &AgentNet, mixer: &Mixer, store: &ParamStore, g: &mut Graph, batch: &Batch, targets: &[f64]) -> Result<Var> {
    let qs = unroll_q(agent, store, g, batch, batch.window)?;
    loss_from_q(mixer, store, g, batch, &qs, targets)
}

fn loss_from_q(mixer: &Mixer, store: &ParamStore, g: &mut Graph, batch: &Batch, qs: &[Var], targets: &[f64]) -> Result<Var> {
    let (b, n, w) = (batch.size, batch.n_agents, batch.window);
    if targets.len() != w * b {
        return Err(Error::Contract(format!("{} targets for a {w}×{b} window", targets.len())));
    }
    let mut totals = Vec::with_capacity(w);
    let mut weights = Vec::with_capacity(w * b);
    for (t, &q) in qs[..w].iter().enumerate() {
        let step = &batch.steps[t];
        totals.push(mixed(mixer, store, g, q, &step.actions, &step.state, b, n)?);
        weights.extend_from_slice(&step.mask);
    }
    let count: f64 = weights.iter().sum();
    if count == 0.0 {
        return Err(Error::Contract("batch contains no valid steps".into()));
    }
    weights.iter_mut().for_each(|v| *v /= count);
    let q_total = g.concat_rows(&totals)?;
    let y = g.input(Tensor::matrix(w * b, 1, targets.to_vec())?);
    g.weighted_sq_err(q_total, y, weights)
}

/// Loss value and online-parameter gradients for `batch`. The online unroll
/// covers one extra slice so it also supplies the double-Q bootstrap actions.
pub fn td_loss(nets: &NetPair, batch: &Batch, gamma: f64, double_q: bool) -> Result<(f64, Gradients)> {
    let mut g = Graph::new();
    let qs = unroll_q(&nets.agent, &nets.online, &mut g, batch, batch.window + 1)?;
    let y = if double_q {
        let online: Vec<&Tensor> = qs.iter().map(|&q| g.value(q)).collect();
        targets_with(nets, batch, gamma, Some(&online))?
    } else {
        targets_with(nets, batch, gamma, None)?
    };
    let loss = loss_from_q(&nets.mixer, &nets.online, &mut g, batch, &qs, &y)?;
    let value = g.value(loss).data()[0];
    Ok((value, g.backward(loss)?.into_params()))
}

/// Optimiser state and update counter.
#[derive(Clone, Debug)]
pub struct Learner {
    adam: AdamState,
    train_steps: u64,
}

impl Learner {
    pub fn new(nets: &NetPair) -> Self {
        Self { adam: AdamState::new(&nets.online), train_steps: 0 }
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// One gradient step on a batch sampled from `replay`; copies the target
    /// every `cfg.target_update` updates. Returns the loss.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        nets: &mut NetPair,
        replay: &ReplayBuffer,
        cfg: &TrainConfig,
        env_step: u64,
        rng: &mut R,
    ) -> Result<f64> {
        let episodes = replay.sample(cfg.batch_size, rng);
        if episodes.is_empty() {
            return Err(Error::Contract("cannot update from an empty replay buffer".into()));
        }
        let (starts, window) = match cfg.bptt_window {
            // Windows may run past the end (masked), so the final, rewarding
            // steps are sampled as often as any other.
            Some(len) => (episodes.iter().map(|e| rng.gen_range(0..e.len())).collect(), len),
            None => (vec![0; episodes.len()], episodes.iter().map(|e| e.len()).max().unwrap_or(1)),
        };
        let batch = make_batch(&episodes, &starts, window, nets.hidden_shape())?;
        let (loss, mut grads) = td_loss(nets, &batch, cfg.gamma, cfg.double_q)?;
        if let Some(c) = cfg.grad_clip {
            grads.clip_global_norm(c);
        }
        let lr = linear_lr(cfg.lr, env_step, cfg.total_steps);
        self.adam.step(&mut nets.online, &grads, lr)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(cfg.target_update) {
            nets.update_targets();
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Action;
    use crate::env::{Heading, StrategyTag};
    use crate::policy::Pose;
    use crate::trainer::episode::{collect_episode, StepRecord};

    fn tiny_model() -> ModelConfig {
        ModelConfig { d_model: 8, heads: 2, depth: 1, rnn_hidden: 6, mixer_embed: 4, hyper_hidden: 4, ..ModelConfig::default() }
    }

    fn scripted(rewards: &[f64]) -> Episode {
        let steps = rewards
            .iter()
            .enumerate()
            .map(|(t, &r)| StepRecord {
                observations: vec![0; 50],
                poses: vec![Pose { row: 0, col: 0, heading: Heading::East }],
                state: vec![0; 3 * 49],
                hidden: vec![0.0; 8],
                actions: vec![Action::Stop],
                rewards: vec![r],
                global_reward: r,
                captures: r as usize,
                done: t + 1 == rewards.len(),
            })
            .collect();
        Episode { seed: 0, strategy: StrategyTag::Still, n_agents: 1, obs_size: 5, width: 7, steps }
    }

    #[test]
    fn terminal_target_is_reward() {
        let nets = NetPair::new(Algorithm::T3Vdn, &tiny_model(), &EnvConfig::new(7, 1, 1), 0).unwrap();
        let ep = scripted(&[0.0, 0.0, 1.0]);
        let batch = make_batch(&[&ep], &[2], 5, (1, 8)).unwrap();
        let y = td_targets(&nets, &batch, 0.95, true).unwrap();
        assert_eq!(y[0], 1.0);
        assert!(y[1..].iter().all(|&v| v == 0.0));
        assert_eq!(batch.steps[0].mask, [1.0]);
        assert!(batch.steps[1..].iter().all(|s| s.mask == [0.0]));
    }

    #[test]
    fn myopic_targets_are_rewards() {
        let nets = NetPair::new(Algorithm::T3Qmix, &tiny_model(), &EnvConfig::new(7, 1, 1), 1).unwrap();
        let ep = scripted(&[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let batch = make_batch(&[&ep], &[1], 5, (1, 8)).unwrap();
        let y = td_targets(&nets, &batch, 0.0, true).unwrap();
        assert_eq!(y, [1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn bootstrap_uses_target_mixer() {
        let nets = NetPair::new(Algorithm::T3Vdn, &tiny_model(), &EnvConfig::new(7, 1, 1), 2).unwrap();
        let ep = scripted(&[0.5, 0.0, 0.0]);
        let batch = make_batch(&[&ep], &[0], 1, (1, 8)).unwrap();
        let y = td_targets(&nets, &batch, 0.9, true).unwrap();
        let mut g = Graph::new();
        let q = unroll_q(&nets.agent, &nets.target, &mut g, &batch, 2).unwrap();
        let next = g.value(q[1]).row_slice(0);
        let expected = 0.5 + 0.9 * next[greedy_action(next)];
        assert!((y[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn window_padding_and_hidden_warm_start() {
        let mut nets = NetPair::new(Algorithm::T3Qmix, &tiny_model(), &EnvConfig::new(7, 2, 1), 3).unwrap();
        let env = EnvConfig::new(7, 2, 1);
        let ep = collect_episode(&env, nets.actor(), 0.5, 11).unwrap();
        let s = ep.len() - 2;
        let batch = make_batch(&[&ep], &[s], 5, (1, 8)).unwrap();
        assert_eq!(batch.steps.len(), 6);
        assert_eq!(batch.steps.iter().map(|st| st.mask[0]).sum::<f64>(), 2.0);
        assert!(batch.steps[1].terminal[0]);
        let stored: Vec<f64> = ep.steps[s].hidden.iter().map(|&v| v as f64).collect();
        assert_eq!(batch.hidden0.data(), &stored[..]);
        let (loss, grads) = td_loss(&nets, &batch, 0.95, true).unwrap();
        assert!(loss.is_finite() && grads.global_norm() > 0.0);
        let y = td_targets(&nets, &batch, 0.95, true).unwrap();
        let mut g = Graph::new();
        let l = td_loss_graph(&nets.agent, &nets.mixer, &nets.online, &mut g, &batch, &y).unwrap();
        assert_eq!(g.value(l).data()[0], loss);
        assert_eq!(g.backward(l).unwrap().into_params(), grads);
        nets.update_targets();
        assert_eq!(nets.online, nets.target);
    }

    #[test]
    fn target_copy_isolation() {
        let mut nets = NetPair::new(Algorithm::Qmix, &tiny_model(), &EnvConfig::new(7, 2, 1), 4).unwrap();
        nets.update_targets();
        let snapshot = nets.target.clone();
        nets.update_targets();
        assert_eq!(nets.target, snapshot);
        let id = nets.online.ids().next().unwrap();
        nets.online.get_mut(id).data_mut()[0] += 1.0;
        assert_eq!(nets.target, snapshot);
        assert_ne!(nets.online, nets.target);
    }

    #[test]
    fn empty_batch_is_rejected() {
        assert!(make_batch(&[], &[], 5, (1, 8)).is_err());
        let ep = scripted(&[0.0]);
        assert!(make_batch(&[&ep], &[1], 5, (1, 8)).is_err());
    }
}
