//! Run directories, training and evaluation commands.

use std::fs;
use std::path::{Path, PathBuf};

use omvp_core::env::{EnvConfig, StrategyTag};
use omvp_core::trainer::{evaluate, train, EvalSummary, TrainOutcome};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::metrics::MetricsWriter;
use crate::Result;

/// Overrides the parent directory of every run.
pub const RUN_ROOT_ENV: &str = "OMVP_RUN_ROOT";

/// First 12 hex digits of the SHA-256 of the canonical config with the seed
/// cleared, so runs differing only in seed share a hash.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.seed = 0;
    c.output_dir = PathBuf::new();
    let digest = Sha256::digest(c.to_toml().as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// `<root>/<algorithm>-<hash>-s<seed>`, where `root` is `$OMVP_RUN_ROOT` if
/// set and the config's `output_dir` otherwise.
pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    let root = std::env::var_os(RUN_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.output_dir.clone());
    root.join(format!("{}-{}-s{}", cfg.algorithm, config_hash(cfg), cfg.seed))
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub metrics: PathBuf,
    /// Intermediate checkpoints in step order, then the final one.
    pub checkpoints: Vec<PathBuf>,
    pub outcome: TrainOutcome,
}

impl RunArtifacts {
    pub fn final_checkpoint(&self) -> &Path {
        self.checkpoints.last().expect("a run always writes its final checkpoint")
    }
}

/// Trains into `dir`, writing `config.toml`, `metrics.csv` and
/// `checkpoints/*.ckpt`. The config is validated before any work.
pub fn train_into(cfg: &RunConfig, dir: &Path) -> Result<RunArtifacts> {
    let train_cfg = cfg.train_config()?;
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;
    let config = dir.join("config.toml");
    fs::write(&config, cfg.to_toml())?;
    let metrics = dir.join("metrics.csv");
    let mut writer = MetricsWriter::new(fs::File::create(&metrics)?)?;

    let every = cfg.train.checkpoint_every;
    let mut next_ckpt = every;
    let mut checkpoints = Vec::new();
    let mut io_error = None;
    let outcome = train(&train_cfg, |row, nets| {
        let step = (|| -> Result<()> {
            writer.write(row)?;
            if every > 0 && row.env_step >= next_ckpt && row.env_step < train_cfg.total_steps {
                while next_ckpt <= row.env_step {
                    next_ckpt += every;
                }
                let path = ckpt_dir.join(format!("step-{:09}.ckpt", row.env_step));
                Checkpoint::new(cfg, row.env_step, row.train_step, &nets.online).save(&path)?;
                checkpoints.push(path);
            }
            Ok(())
        })();
        step.map_err(|e| {
            let msg = e.to_string();
            io_error = Some(e);
            omvp_core::Error::Contract(msg)
        })
    });
    let outcome = match (outcome, io_error) {
        (_, Some(e)) => return Err(e),
        (r, None) => r?,
    };

    let last = ckpt_dir.join("final.ckpt");
    Checkpoint::new(cfg, outcome.env_steps, outcome.train_steps, &outcome.nets.online).save(&last)?;
    checkpoints.push(last);
    Ok(RunArtifacts { dir: dir.to_path_buf(), config, metrics, checkpoints, outcome })
}

/// `train` command: trains into [`run_dir`].
pub fn cmd_train(config_path: &Path) -> Result<RunArtifacts> {
    let cfg = RunConfig::load(config_path)?;
    cfg.train_config()?;
    train_into(&cfg, &run_dir(&cfg))
}

/// Scenario for evaluating a checkpoint: its training scenario with
/// optional overrides.
pub fn eval_scenario(ck: &Checkpoint, width: Option<usize>, preset: Option<(usize, usize)>, pin_still: bool) -> Result<EnvConfig> {
    let mut env = ck.config.env_config()?;
    if let Some(w) = width {
        env.width = w;
    }
    if let Some((n, m)) = preset {
        env.pursuers = n;
        env.evaders = m;
    }
    if pin_still {
        env.pinned_strategy = Some(StrategyTag::Still);
    }
    env.validate()?;
    Ok(env)
}

/// Greedy evaluation of a checkpoint on `env`.
pub fn eval_checkpoint(ck: &Checkpoint, env: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalSummary> {
    let nets = ck.nets_for(env)?;
    Ok(evaluate(nets.actor(), env, episodes, seed)?)
}
