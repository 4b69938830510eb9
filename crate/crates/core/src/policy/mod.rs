//! Agent networks mapping pursuer observations to per-action values.

mod features;
mod recurrent;
mod transformer;

use alloc::vec::Vec;

pub use features::{agent_features, feature_len, push_features, stack_features, team_features, team_inputs, Pose};
pub use recurrent::{RecurrentConfig, RecurrentPolicy};
pub use transformer::{attention, HiddenTokens, TransformerConfig, TransformerPolicy};

use crate::tensor::{Graph, ParamStore, Tensor, Var};
use crate::Result;

/// Nodes produced by one agent-network forward pass.
#[derive(Clone, Debug)]
pub struct PolicyOutput {
    /// `(batch·n_agents) × 5` action values.
    pub q: Var,
    /// Next recurrent state, same layout as the input state.
    pub hidden: Var,
    /// Attention weights, layer-major, then head, then sample. Empty for the
    /// recurrent baseline.
    pub attention: Vec<Var>,
}

/// One head's `(tokens × tokens)` attention weights.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pub layer: usize,
    pub head: usize,
    pub weights: Tensor,
}

/// Concrete values of a single-sample forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub q: Tensor,
    pub hidden: Tensor,
    pub attention: Vec<AttentionMap>,
}

/// Either agent network, behind one interface.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentNet {
    Transformer(TransformerPolicy),
    Recurrent(RecurrentPolicy),
}

impl AgentNet {
    /// Hidden-state rows per sample.
    pub fn hidden_rows(&self, n_agents: usize) -> usize {
        match self {
            AgentNet::Transformer(t) => t.config().hidden_rows(n_agents),
            AgentNet::Recurrent(_) => n_agents,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            AgentNet::Transformer(t) => t.config().d_model,
            AgentNet::Recurrent(r) => r.config().hidden,
        }
    }

    /// Zero state for `batch` samples.
    pub fn initial_hidden(&self, batch: usize, n_agents: usize) -> Tensor {
        Tensor::zeros(&[batch * self.hidden_rows(n_agents), self.hidden_dim()])
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        features: Var,
        hidden: Var,
        batch: usize,
        n_agents: usize,
    ) -> Result<PolicyOutput> {
        match self {
            AgentNet::Transformer(t) => t.forward(g, store, features, hidden, batch, n_agents),
            AgentNet::Recurrent(r) => r.forward(g, store, features, hidden),
        }
    }

    /// Single-sample evaluation of `features` (`n_agents × input_dim`).
    pub fn evaluate(&self, store: &ParamStore, features: &Tensor, hidden: &Tensor) -> Result<Evaluation> {
        let n_agents = features.rows();
        let mut g = Graph::new();
        let f = g.input(features.clone());
        let h = g.input(hidden.clone());
        let out = self.forward(&mut g, store, f, h, 1, n_agents)?;
        let heads = match self {
            AgentNet::Transformer(t) => t.config().heads,
            AgentNet::Recurrent(_) => 1,
        };
        let attention = out
            .attention
            .iter()
            .enumerate()
            .map(|(i, &v)| AttentionMap { layer: i / heads, head: i % heads, weights: g.value(v).clone() })
            .collect();
        Ok(Evaluation { q: g.value(out.q).clone(), hidden: g.value(out.hidden).clone(), attention })
    }
}
