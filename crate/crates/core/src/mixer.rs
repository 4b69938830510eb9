//! Centralised credit assignment: combines the chosen-action values of every
//! pursuer into one team value, conditioned on the global state.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::layers::Linear;
use crate::tensor::{Graph, ParamStore, Tensor, Var};
use crate::{Error, Result};

/// Additive mixing: the team value is the plain sum.
pub fn vdn_mix(q: &[f64]) -> f64 {
    q.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QmixConfig {
    pub state_dim: usize,
    pub n_agents: usize,
    /// Width of the mixing layer.
    pub embed: usize,
    /// Width of the hypernetworks' inner layer.
    pub hyper_hidden: usize,
}

impl QmixConfig {
    pub fn new(state_dim: usize, n_agents: usize) -> Self {
        Self { state_dim, n_agents, embed: 128, hyper_hidden: 128 }
    }
}

/// Two dense layers with an `elu` between them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Hyper {
    first: Linear,
    second: Linear,
}

impl Hyper {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dims: (usize, usize, usize), rng: &mut R) -> Result<Self> {
        Ok(Self {
            first: Linear::new(store, &format!("{name}.0"), dims.0, dims.1, rng)?,
            second: Linear::new(store, &format!("{name}.1"), dims.1, dims.2, rng)?,
        })
    }

    fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let h = self.first.forward(g, store, x)?;
        let h = g.elu(h);
        self.second.forward(g, store, h)
    }
}

/// Monotonic mixing network whose weights are produced from the state by
/// hypernetworks:
///
/// ```text
/// hidden  = elu(q · |W1(s)| + b1(s))        W1(s): N × embed
/// Q_total = hidden · |wf(s)| + bf(s)
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct QmixMixer {
    cfg: QmixConfig,
    w1: Hyper,
    wf: Hyper,
    b1: Linear,
    bf: Hyper,
}

impl QmixMixer {
    pub fn new<R: Rng + ?Sized>(cfg: QmixConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        if cfg.n_agents == 0 || cfg.embed == 0 || cfg.hyper_hidden == 0 || cfg.state_dim == 0 {
            return Err(Error::InvalidConfig(format!("degenerate mixer configuration {cfg:?}")));
        }
        let (s, h, e) = (cfg.state_dim, cfg.hyper_hidden, cfg.embed);
        Ok(Self {
            cfg,
            w1: Hyper::new(store, &format!("{prefix}.hyper_w1"), (s, h, e * cfg.n_agents), rng)?,
            wf: Hyper::new(store, &format!("{prefix}.hyper_wf"), (s, h, e), rng)?,
            b1: Linear::new(store, &format!("{prefix}.hyper_b1"), s, e, rng)?,
            bf: Hyper::new(store, &format!("{prefix}.hyper_bf"), (s, h, 1), rng)?,
        })
    }

    pub fn config(&self) -> &QmixConfig {
        &self.cfg
    }

    /// `q`: `B × N` chosen-action values, `state`: `B × state_dim`.
    /// Returns the `B × 1` team values.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, q: Var, state: Var) -> Result<Var> {
        let (b, n) = g.value(q).dims();
        if n != self.cfg.n_agents || g.value(state).dims() != (b, self.cfg.state_dim) {
            return Err(Error::Contract(format!(
                "mixer expects q: B×{} and state: B×{}, got {:?} and {:?}",
                self.cfg.n_agents,
                self.cfg.state_dim,
                g.value(q).shape(),
                g.value(state).shape()
            )));
        }
        let e = self.cfg.embed;
        let w1 = self.w1.forward(g, store, state)?;
        let w1 = g.abs(w1);
        // Row-wise q · W1: agent i scales its own block of `embed` columns.
        let mut acc = None;
        for i in 0..n {
            let block = g.slice_cols(w1, i * e, e)?;
            let qi = g.slice_cols(q, i, 1)?;
            let term = g.mul_col(block, qi)?;
            acc = Some(match acc {
                None => term,
                Some(a) => g.add(a, term)?,
            });
        }
        let b1 = self.b1.forward(g, store, state)?;
        let pre = g.add(acc.expect("at least one agent"), b1)?;
        let hidden = g.elu(pre);

        let wf = self.wf.forward(g, store, state)?;
        let wf = g.abs(wf);
        let weighted = g.mul(hidden, wf)?;
        let total = g.row_sums(weighted);
        let bf = self.bf.forward(g, store, state)?;
        g.add(total, bf)
    }

    /// Team value of a single `(q, state)` pair.
    pub fn mix(&self, store: &ParamStore, q: &[f64], state: &[f64]) -> Result<f64> {
        let mut g = Graph::new();
        let qv = g.input(Tensor::row(q.to_vec()));
        let sv = g.input(Tensor::row(state.to_vec()));
        let out = self.forward(&mut g, store, qv, sv)?;
        Ok(g.value(out).data()[0])
    }

    /// Team values for many `q` rows sharing one state.
    fn mix_rows(&self, store: &ParamStore, q: Tensor, state: &[f64]) -> Result<Vec<f64>> {
        let rows = q.rows();
        let mut states = Vec::with_capacity(rows * state.len());
        for _ in 0..rows {
            states.extend_from_slice(state);
        }
        let mut g = Graph::new();
        let qv = g.input(q);
        let sv = g.input(Tensor::matrix(rows, state.len(), states)?);
        let out = self.forward(&mut g, store, qv, sv)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Smallest central-difference estimate of `∂Q_total/∂q_i` over `samples`
    /// random points and every agent. Values are drawn from `U(-2, 2)`, state
    /// entries from `{0, 1}`.
    pub fn monotonicity_probe<R: Rng + ?Sized>(&self, store: &ParamStore, samples: usize, rng: &mut R) -> Result<f64> {
        if samples == 0 {
            return Err(Error::Contract("monotonicity probe needs at least one sample".into()));
        }
        const H: f64 = 1e-6;
        let n = self.cfg.n_agents;
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let state: Vec<f64> = (0..self.cfg.state_dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let mut rows = Vec::with_capacity(2 * n * n);
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    let mut p = q.clone();
                    p[i] += sign * H;
                    rows.extend(p);
                }
            }
            let values = self.mix_rows(store, Tensor::matrix(2 * n, n, rows)?, &state)?;
            for i in 0..n {
                worst = worst.min((values[2 * i] - values[2 * i + 1]) / (2.0 * H));
            }
        }
        Ok(worst)
    }
}

/// Credit-assignment function used by a learner.
#[derive(Clone, Debug, PartialEq)]
pub enum Mixer {
    Vdn,
    Qmix(QmixMixer),
}

impl Mixer {
    /// `q`: `B × N`, `state`: `B × state_dim` (ignored by VDN). Returns `B × 1`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, q: Var, state: Var) -> Result<Var> {
        match self {
            Mixer::Vdn => Ok(g.row_sums(q)),
            Mixer::Qmix(m) => m.forward(g, store, q, state),
        }
    }

    pub fn mix(&self, store: &ParamStore, q: &[f64], state: &[f64]) -> Result<f64> {
        match self {
            Mixer::Vdn => Ok(vdn_mix(q)),
            Mixer::Qmix(m) => m.mix(store, q, state),
        }
    }
}
