//! Attention-weight export for heatmaps.

use std::io::Write;

use omvp_core::env::EnvConfig;
use omvp_core::policy::AttentionMap;
use omvp_core::trainer::{Actor, Rollout};

use crate::{Error, Result};

/// Attention maps of one greedy decision.
#[derive(Clone, Debug, PartialEq)]
pub struct StepAttention {
    pub t: u32,
    pub maps: Vec<AttentionMap>,
}

/// Plays a greedy episode and returns the attention maps of the decisions
/// taken at times `t − 1` (when `t > 0`) and `t`. Rows and columns index
/// tokens: pursuers first, then the hidden token(s).
pub fn collect_attention(actor: Actor<'_>, env: &EnvConfig, seed: u64, t: u32) -> Result<Vec<StepAttention>> {
    if matches!(actor, Actor::Uniform) {
        return Err(Error::Config("attention export needs a transformer checkpoint, not the random policy".into()));
    }
    let mut rollout = Rollout::new(env, actor, 0.0, seed)?;
    let mut out = Vec::new();
    loop {
        if rollout.is_done() {
            return Err(Error::Config(format!("step {t} is outside the episode, which ended after {} steps", rollout.world().t())));
        }
        let now = rollout.world().t();
        let tr = rollout.step()?;
        if now + 1 >= t {
            let maps = tr.evaluation.map(|e| e.attention).unwrap_or_default();
            if maps.is_empty() {
                return Err(Error::Config("the checkpoint's agent network has no attention layers".into()));
            }
            out.push(StepAttention { t: now, maps });
        }
        if now == t {
            return Ok(out);
        }
    }
}

/// Long-format CSV: `t,layer,head,query,key,weight`.
pub fn write_csv<W: Write>(inner: W, steps: &[StepAttention]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(inner);
    csv.write_record(["t", "layer", "head", "query", "key", "weight"])?;
    for s in steps {
        for m in &s.maps {
            for q in 0..m.weights.rows() {
                for (k, w) in m.weights.row_slice(q).iter().enumerate() {
                    csv.write_record([
                        s.t.to_string(),
                        m.layer.to_string(),
                        m.head.to_string(),
                        q.to_string(),
                        k.to_string(),
                        w.to_string(),
                    ])?;
                }
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// Mean attention each pursuer token receives, over queries, layers and
/// heads.
pub fn incoming_attention(step: &StepAttention, n_agents: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_agents];
    let mut count = 0usize;
    for m in &step.maps {
        for q in 0..m.weights.rows() {
            for (k, a) in acc.iter_mut().enumerate() {
                *a += m.weights.get(q, k);
            }
            count += 1;
        }
    }
    acc.iter().map(|a| a / count.max(1) as f64).collect()
}
