//! Dense layers shared by the agent networks and the mixer.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::Result;

/// `rows × cols` tensor drawn from `U(-bound, bound)`.
pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, bound: f64, rng: &mut R) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::matrix(rows, cols, data).expect("length matches")
}

/// `x · W + b`, with `W: in × out` and `b: 1 × out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    /// Registers `{name}.w` and `{name}.b`, both `U(±1/√in)`.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut R) -> Result<Self> {
        let bound = 1.0 / libm::sqrt(inputs.max(1) as f64);
        let weight = store.add(format!("{name}.w"), uniform(inputs, outputs, bound, rng))?;
        let bias = store.add(format!("{name}.b"), uniform(1, outputs, bound, rng))?;
        Ok(Self { weight, bias, inputs, outputs })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

/// Gain and bias of a row-wise layer normalisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Result<Self> {
        let gain = store.add(format!("{name}.gain"), Tensor::row(alloc::vec![1.0; width]))?;
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[1, width]))?;
        Ok(Self { gain, bias })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let gain = g.param(store, self.gain);
        let bias = g.param(store, self.bias);
        g.layer_norm(x, gain, bias, Self::EPS)
    }
}
