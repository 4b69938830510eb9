use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::PolicyOutput;
use crate::env::Action;
use crate::layers::Linear;
use crate::tensor::{Graph, ParamStore, Var};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecurrentConfig {
    pub input_dim: usize,
    pub hidden: usize,
}

/// Per-agent GRU baseline: `elu(fc(x))` feeds a GRU cell whose state goes
/// through a linear Q-head. Agents share weights but never see each other.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentPolicy {
    cfg: RecurrentConfig,
    fc: Linear,
    gru_x: Linear,
    gru_h: Linear,
    q_head: Linear,
}

impl RecurrentPolicy {
    pub fn new<R: Rng + ?Sized>(cfg: RecurrentConfig, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        if cfg.hidden == 0 {
            return Err(Error::InvalidConfig("recurrent hidden size must be positive".into()));
        }
        let h = cfg.hidden;
        Ok(Self {
            cfg,
            fc: Linear::new(store, &format!("{prefix}.fc"), cfg.input_dim, h, rng)?,
            gru_x: Linear::new(store, &format!("{prefix}.gru_x"), h, 3 * h, rng)?,
            gru_h: Linear::new(store, &format!("{prefix}.gru_h"), h, 3 * h, rng)?,
            q_head: Linear::new(store, &format!("{prefix}.q_head"), h, Action::COUNT, rng)?,
        })
    }

    pub fn config(&self) -> &RecurrentConfig {
        &self.cfg
    }

    /// `features`: `rows × input_dim`, `hidden`: `rows × hidden`; every row
    /// is an independent agent.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, features: Var, hidden: Var) -> Result<PolicyOutput> {
        let rows = g.value(features).rows();
        if g.value(features).cols() != self.cfg.input_dim || g.value(hidden).dims() != (rows, self.cfg.hidden) {
            return Err(Error::Shape(format!(
                "recurrent agent: features {:?}, hidden {:?}",
                g.value(features).shape(),
                g.value(hidden).shape()
            )));
        }
        let h = self.cfg.hidden;
        let x = self.fc.forward(g, store, features)?;
        let x = g.elu(x);
        let gx = self.gru_x.forward(g, store, x)?;
        let gh = self.gru_h.forward(g, store, hidden)?;

        let xr = g.slice_cols(gx, 0, h)?;
        let xz = g.slice_cols(gx, h, h)?;
        let xn = g.slice_cols(gx, 2 * h, h)?;
        let hr = g.slice_cols(gh, 0, h)?;
        let hz = g.slice_cols(gh, h, h)?;
        let hn = g.slice_cols(gh, 2 * h, h)?;

        let r = g.add(xr, hr)?;
        let r = g.sigmoid(r);
        let z = g.add(xz, hz)?;
        let z = g.sigmoid(z);
        let gated = g.mul(r, hn)?;
        let n = g.add(xn, gated)?;
        let n = g.tanh(n);
        // h' = (1 − z)·n + z·h = n + z·(h − n)
        let diff = g.sub(hidden, n)?;
        let keep = g.mul(z, diff)?;
        let next = g.add(n, keep)?;

        let q = self.q_head.forward(g, store, next)?;
        Ok(PolicyOutput { q, hidden: next, attention: Vec::new() })
    }
}
