use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::PolicyOutput;
use crate::env::Action;
use crate::layers::{LayerNorm, Linear};
use crate::tensor::{Graph, ParamId, ParamStore, Var};
use crate::{Error, Result};

/// How many recurrent hidden tokens enter the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HiddenTokens {
    /// One token shared by the whole team.
    Team,
    /// One token per agent.
    PerAgent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TransformerConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub heads: usize,
    pub depth: usize,
    pub layer_norm: bool,
    pub hidden_tokens: HiddenTokens,
}

impl TransformerConfig {
    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::InvalidConfig(format!(
                "embedding length {} must be a positive multiple of the head count {}",
                self.d_model, self.heads
            )));
        }
        if self.depth == 0 {
            return Err(Error::InvalidConfig("transformer depth must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hidden_rows(&self, n_agents: usize) -> usize {
        match self.hidden_tokens {
            HiddenTokens::Team => 1,
            HiddenTokens::PerAgent => n_agents,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    out: Linear,
    norm1: Option<LayerNorm>,
    ff1: Linear,
    ff2: Linear,
    norm2: Option<LayerNorm>,
}

/// Agent network: one token per pursuer plus the recurrent hidden token(s)
/// pass through a stack of self-attention blocks; each pursuer's output token
/// is mapped to its five action values and the hidden token's output becomes
/// the next hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerPolicy {
    cfg: TransformerConfig,
    embed: Linear,
    blocks: Vec<Block>,
    q_head: Linear,
}

/// `softmax(q·kᵀ / √d_k) · v`; returns the output and the weight matrix.
pub fn attention(g: &mut Graph, q: Var, k: Var, v: Var) -> Result<(Var, Var)> {
    let dk = g.value(q).cols();
    if g.value(k).cols() != dk || g.value(k).rows() != g.value(v).rows() {
        return Err(Error::Shape(format!("attention: q {:?}, k {:?}, v {:?}", g.value(q).shape(), g.value(k).shape(), g.value(v).shape())));
    }
    let logits = g.matmul_nt(q, k)?;
    let scaled = g.scale(logits, 1.0 / libm::sqrt(dk as f64));
    let weights = g.softmax_rows(scaled);
    let out = g.matmul(weights, v)?;
    Ok((out, weights))
}

impl TransformerPolicy {
    pub fn new<R: Rng + ?Sized>(cfg: TransformerConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let embed = Linear::new(store, &format!("{prefix}.embed"), cfg.input_dim, d, rng)?;
        let bound = 1.0 / libm::sqrt(d as f64);
        let mut blocks = Vec::with_capacity(cfg.depth);
        for l in 0..cfg.depth {
            let p = format!("{prefix}.block{l}");
            let mut proj = |name: &str| store.add(format!("{p}.{name}"), crate::layers::uniform(d, d, bound, rng));
            let wq = proj("wq")?;
            let wk = proj("wk")?;
            let wv = proj("wv")?;
            let out = Linear::new(store, &format!("{p}.attn_out"), d, d, rng)?;
            let norm1 = cfg.layer_norm.then(|| LayerNorm::new(store, &format!("{p}.norm1"), d)).transpose()?;
            let ff1 = Linear::new(store, &format!("{p}.ff1"), d, d, rng)?;
            let ff2 = Linear::new(store, &format!("{p}.ff2"), d, d, rng)?;
            let norm2 = cfg.layer_norm.then(|| LayerNorm::new(store, &format!("{p}.norm2"), d)).transpose()?;
            blocks.push(Block { wq, wk, wv, out, norm1, ff1, ff2, norm2 });
        }
        let q_head = Linear::new(store, &format!("{prefix}.q_head"), d, Action::COUNT, rng)?;
        Ok(Self { cfg, embed, blocks, q_head })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.cfg
    }

    /// Projects each agent's features (`rows × input_dim`) to a token.
    pub fn embed_tokens(&self, g: &mut Graph, store: &ParamStore, features: Var) -> Result<Var> {
        if g.value(features).cols() != self.cfg.input_dim {
            return Err(Error::Shape(format!(
                "agent features have {} columns, network expects {}",
                g.value(features).cols(),
                self.cfg.input_dim
            )));
        }
        self.embed.forward(g, store, features)
    }

    /// One encoder block over `batch` independent sequences of `seq` tokens
    /// stacked row-wise. Appends the attention weights (layer-major, then
    /// head, then sample) to `attn`.
    fn block(&self, g: &mut Graph, store: &ParamStore, b: &Block, x: Var, batch: usize, seq: usize, attn: &mut Vec<Var>) -> Result<Var> {
        let dk = self.cfg.head_dim();
        let wq = g.param(store, b.wq);
        let wk = g.param(store, b.wk);
        let wv = g.param(store, b.wv);
        let q_all = g.matmul(x, wq)?;
        let k_all = g.matmul(x, wk)?;
        let v_all = g.matmul(x, wv)?;

        let mut per_head_weights: Vec<Vec<Var>> = (0..self.cfg.heads).map(|_| Vec::with_capacity(batch)).collect();
        let mut samples = Vec::with_capacity(batch);
        for s in 0..batch {
            let q_s = g.slice_rows(q_all, s * seq, seq)?;
            let k_s = g.slice_rows(k_all, s * seq, seq)?;
            let v_s = g.slice_rows(v_all, s * seq, seq)?;
            let mut heads = Vec::with_capacity(self.cfg.heads);
            for (h, weights_h) in per_head_weights.iter_mut().enumerate() {
                let q = g.slice_cols(q_s, h * dk, dk)?;
                let k = g.slice_cols(k_s, h * dk, dk)?;
                let v = g.slice_cols(v_s, h * dk, dk)?;
                let (o, w) = attention(g, q, k, v)?;
                heads.push(o);
                weights_h.push(w);
            }
            samples.push(g.concat_cols(&heads)?);
        }
        attn.extend(per_head_weights.into_iter().flatten());

        let multi = g.concat_rows(&samples)?;
        let multi = b.out.forward(g, store, multi)?;
        let y = g.add(x, multi)?;
        let y = match b.norm1 {
            Some(n) => n.forward(g, store, y)?,
            None => y,
        };
        let f = b.ff1.forward(g, store, y)?;
        let f = g.elu(f);
        let f = b.ff2.forward(g, store, f)?;
        let out = g.add(y, f)?;
        match b.norm2 {
            Some(n) => n.forward(g, store, out),
            None => Ok(out),
        }
    }

    /// Batched forward pass. `features`: `(batch·n_agents) × input_dim`;
    /// `hidden`: `(batch·hidden_rows) × d_model`. Sample `s` owns feature
    /// rows `s·n_agents..` and hidden rows `s·hidden_rows..`.
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        features: Var,
        hidden: Var,
        batch: usize,
        n_agents: usize,
    ) -> Result<PolicyOutput> {
        let h_rows = self.cfg.hidden_rows(n_agents);
        if g.value(features).rows() != batch * n_agents {
            return Err(Error::Shape(format!(
                "expected {} feature rows for {batch} samples of {n_agents} agents, got {}",
                batch * n_agents,
                g.value(features).rows()
            )));
        }
        if g.value(hidden).dims() != (batch * h_rows, self.cfg.d_model) {
            return Err(Error::Shape(format!(
                "hidden state has shape {:?}, expected ({}, {})",
                g.value(hidden).shape(),
                batch * h_rows,
                self.cfg.d_model
            )));
        }
        let tokens = self.embed_tokens(g, store, features)?;
        let stacked = g.concat_rows(&[tokens, hidden])?;
        let seq = n_agents + h_rows;
        let mut order = Vec::with_capacity(batch * seq);
        for s in 0..batch {
            order.extend(s * n_agents..(s + 1) * n_agents);
            order.extend((0..h_rows).map(|j| batch * n_agents + s * h_rows + j));
        }
        let mut x = g.gather_rows(stacked, &order)?;

        let mut attention = Vec::with_capacity(self.cfg.depth * self.cfg.heads * batch);
        for b in &self.blocks {
            x = self.block(g, store, b, x, batch, seq, &mut attention)?;
        }

        let agent_rows: Vec<usize> = (0..batch).flat_map(|s| (0..n_agents).map(move |k| s * seq + k)).collect();
        let hidden_rows: Vec<usize> = (0..batch).flat_map(|s| (0..h_rows).map(move |j| s * seq + n_agents + j)).collect();
        let agents = g.gather_rows(x, &agent_rows)?;
        let q = self.q_head.forward(g, store, agents)?;
        let hidden = g.gather_rows(x, &hidden_rows)?;
        Ok(PolicyOutput { q, hidden, attention })
    }
}
