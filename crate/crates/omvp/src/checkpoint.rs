//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic | `b"OMVPCKPT"` |
//! | version | `u32` |
//! | env step, train step | `u64`, `u64` |
//! | config | `u32` length + UTF-8 TOML |
//! | tensor count | `u32` |
//! | per tensor | `u32` name length, name, `u32` rank, `u64` dims, `f64` values |
//!
//! Values are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use omvp_core::env::EnvConfig;
use omvp_core::tensor::{ParamStore, Tensor};
use omvp_core::trainer::NetPair;

use crate::config::RunConfig;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"OMVPCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub env_step: u64,
    pub train_step: u64,
    /// Online parameters by name.
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new(config: &RunConfig, env_step: u64, train_step: u64, params: &ParamStore) -> Self {
        Self { config: config.clone(), env_step, train_step, params: params.iter().map(|(n, t)| (n.to_owned(), t.clone())).collect() }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.env_step.to_le_bytes());
        out.extend_from_slice(&self.train_step.to_le_bytes());
        put_bytes(&mut out, self.config.to_toml().as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in &self.params {
            put_bytes(&mut out, name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let env_step = read_u64(&mut r)?;
        let train_step = read_u64(&mut r)?;
        let text = String::from_utf8(read_bytes(&mut r)?).map_err(|_| Error::Checkpoint("embedded config is not UTF-8".into()))?;
        let config = RunConfig::from_toml(&text)?;
        let count = read_u32(&mut r)? as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let name = String::from_utf8(read_bytes(&mut r)?).map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
            let rank = read_u32(&mut r)? as usize;
            let shape = (0..rank).map(|_| read_u64(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            if len.saturating_mul(8) > r.len() {
                return Err(Error::Checkpoint(format!("parameter {name} is truncated")));
            }
            let data = (0..len).map(|_| read_u64(&mut r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            params.push((name, Tensor::new(shape, data)?));
        }
        if !r.is_empty() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", r.len())));
        }
        Ok(Self { config, env_step, train_step, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Networks for the checkpoint's own scenario.
    pub fn nets(&self) -> Result<NetPair> {
        self.nets_for(&self.config.env_config()?)
    }

    /// Networks for `env`, which may differ from the training scenario as
    /// long as every parameter keeps its shape.
    pub fn nets_for(&self, env: &EnvConfig) -> Result<NetPair> {
        let algorithm = self.config.algorithm()?;
        let model = self.config.model_config()?;
        let mut nets = NetPair::new(algorithm, &model, env, self.config.seed)?;
        nets.online.load_named(&self.params).map_err(|e| {
            Error::Checkpoint(format!(
                "checkpoint does not fit a {}×{} {}v{} scenario: {e}",
                env.width, env.width, env.pursuers, env.evaders
            ))
        })?;
        nets.update_targets();
        Ok(nets)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|_| Error::Checkpoint("unexpected end of file".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bytes(r: &mut &[u8]) -> Result<Vec<u8>> {
    let n = read_u32(r)? as usize;
    if n > r.len() {
        return Err(Error::Checkpoint("unexpected end of file".into()));
    }
    let mut b = vec![0u8; n];
    read_exact(r, &mut b)?;
    Ok(b)
}
