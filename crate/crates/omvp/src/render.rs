//! Text frames and JSON-lines traces of single episodes.

use std::io::Write;

use omvp_core::env::{Action, EnvConfig, WorldState};
use omvp_core::trainer::{Actor, Rollout};
use serde::Serialize;

use crate::Result;

/// One character per cell: `#` building, `.` road, `E` live evader, a digit
/// for pursuer `k < 10`, `P` for any other pursuer or for a cell shared by
/// several pursuers.
pub fn frame(world: &WorldState) -> Vec<String> {
    let map = world.map();
    let w = map.width();
    let mut grid: Vec<Vec<char>> =
        (0..w).map(|r| (0..w).map(|c| if map.is_obstacle((r, c).into()) { '#' } else { '.' }).collect()).collect();
    for e in world.evaders().iter().filter(|e| e.alive) {
        grid[e.position.row][e.position.col] = 'E';
    }
    for (k, p) in world.pursuers().iter().enumerate() {
        let cell = &mut grid[p.position.row][p.position.col];
        *cell = if cell.is_ascii_digit() || k >= 10 { 'P' } else { char::from(b'0' + k as u8) };
    }
    grid.into_iter().map(|row| row.into_iter().collect()).collect()
}

pub fn action_name(a: Action) -> &'static str {
    match a {
        Action::Forward => "forward",
        Action::Backward => "backward",
        Action::TurnLeft => "left",
        Action::TurnRight => "right",
        Action::Stop => "stop",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceCapture {
    pub evader: usize,
    pub pursuers: Vec<usize>,
}

/// One line of an episode trace, describing the state after step `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: u32,
    /// `[row, col]` per pursuer.
    pub pursuers: Vec<[usize; 2]>,
    /// `[row, col]` per evader, `null` once captured.
    pub evaders: Vec<Option<[usize; 2]>>,
    pub actions: Vec<&'static str>,
    pub rewards: Vec<f64>,
    pub global_reward: f64,
    pub captures: Vec<TraceCapture>,
}

/// Plays one greedy episode, writing a frame per step (blank-line separated)
/// to `frames` and a JSON object per step to `trace`. Returns the episode's
/// total reward.
pub fn render_episode(actor: Actor<'_>, env: &EnvConfig, seed: u64, frames: &mut impl Write, trace: &mut impl Write) -> Result<f64> {
    let mut rollout = Rollout::new(env, actor, 0.0, seed)?;
    let mut total = 0.0;
    while !rollout.is_done() {
        let tr = rollout.step()?;
        let world = rollout.world();
        total += tr.outcome.global_reward;
        if world.t() > 1 {
            writeln!(frames)?;
        }
        for line in frame(world) {
            writeln!(frames, "{line}")?;
        }
        let rec = TraceRecord {
            t: world.t(),
            pursuers: world.pursuers().iter().map(|p| [p.position.row, p.position.col]).collect(),
            evaders: world.evaders().iter().map(|e| e.alive.then_some([e.position.row, e.position.col])).collect(),
            actions: tr.record.actions.iter().map(|&a| action_name(a)).collect(),
            rewards: tr.outcome.per_agent_reward.clone(),
            global_reward: tr.outcome.global_reward,
            captures: tr.outcome.captures.iter().map(|c| TraceCapture { evader: c.evader, pursuers: c.pursuers.clone() }).collect(),
        };
        serde_json::to_writer(&mut *trace, &rec).map_err(|e| crate::Error::Io(e.to_string()))?;
        writeln!(trace)?;
    }
    Ok(total)
}
