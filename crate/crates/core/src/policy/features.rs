use alloc::format;
use alloc::vec::Vec;

use crate::env::{Heading, PursuerObservation, WorldState};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Where a pursuer is and which way it faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pose {
    pub row: usize,
    pub col: usize,
    pub heading: Heading,
}

/// Length of one agent's input vector for an `obs_size × obs_size` window.
pub fn feature_len(obs_size: usize) -> usize {
    2 * obs_size * obs_size + 2 + 4
}

/// `[E flattened, B flattened, row/(W−1), col/(W−1), heading one-hot]`.
pub fn agent_features(obs: &PursuerObservation, pose: Pose, width: usize) -> Vec<f64> {
    let mut f = Vec::with_capacity(feature_len(obs.size));
    push_features(&obs.evaders, &obs.obstacles, pose, width, &mut f);
    f
}

/// Appends the feature vector built from raw `E` and `B` windows to `out`.
pub fn push_features(evaders: &[u8], obstacles: &[u8], pose: Pose, width: usize, out: &mut Vec<f64>) {
    out.extend(evaders.iter().map(|&v| v as f64));
    out.extend(obstacles.iter().map(|&v| v as f64));
    let scale = (width.max(2) - 1) as f64;
    out.push(pose.row as f64 / scale);
    out.push(pose.col as f64 / scale);
    let mut onehot = [0.0; 4];
    onehot[pose.heading.index()] = 1.0;
    out.extend(onehot);
}

/// Stacks per-agent features into an `N × feature_len` matrix.
pub fn stack_features(observations: &[PursuerObservation], poses: &[Pose], width: usize) -> Result<Tensor> {
    if observations.len() != poses.len() {
        return Err(Error::Contract(format!("{} observations but {} poses", observations.len(), poses.len())));
    }
    let size = observations.first().map_or(0, |o| o.size);
    if observations.iter().any(|o| o.size != size) {
        return Err(Error::Shape("observations use different window sizes".into()));
    }
    let mut data = Vec::with_capacity(observations.len() * feature_len(size));
    for (o, &p) in observations.iter().zip(poses) {
        data.extend(agent_features(o, p, width));
    }
    Tensor::matrix(observations.len(), feature_len(size), data)
}

/// Current observations and poses of every pursuer.
pub fn team_inputs(world: &WorldState) -> Result<(Vec<PursuerObservation>, Vec<Pose>)> {
    let obs = world.observe_all()?;
    let poses = world.pursuers().iter().map(|p| Pose { row: p.position.row, col: p.position.col, heading: p.heading }).collect();
    Ok((obs, poses))
}

/// Feature matrix of the whole team, ready for the agent network.
pub fn team_features(world: &WorldState) -> Result<Tensor> {
    let (obs, poses) = team_inputs(world)?;
    stack_features(&obs, &poses, world.map().width())
}
