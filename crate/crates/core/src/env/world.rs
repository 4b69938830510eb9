use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::evader::{evader_action, EvaderMove, EvaderStrategy, StrategyTag};
use super::map::{Cell, GridMap, Heading};
use super::observe::PursuerObservation;
use crate::{Error, Result};

/// Episode length.
pub const DEFAULT_HORIZON: u32 = 50;
/// Side of the square observation window.
pub const DEFAULT_OBS_SIZE: usize = 5;

/// The five pursuer actions; also the column order of every Q-value head.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [Action::Forward, Action::Backward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VehicleKind {
    Pursuer,
    Evader,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VehicleState {
    pub position: Cell,
    pub heading: Heading,
    pub kind: VehicleKind,
    pub alive: bool,
}

/// Resulting `(position, heading)` of a pursuer taking `action`. Moves into
/// buildings or off the grid, and turns away from intersections, degrade to
/// [`Action::Stop`].
pub fn apply_pursuer_action(map: &GridMap, position: Cell, heading: Heading, action: Action) -> (Cell, Heading) {
    let stay = (position, heading);
    match action {
        Action::Stop => stay,
        Action::Forward => map.road_neighbor(position, heading).map_or(stay, |c| (c, heading)),
        Action::Backward => map.road_neighbor(position, heading.opposite()).map_or(stay, |c| (c, heading)),
        Action::TurnLeft | Action::TurnRight => {
            if !map.is_intersection(position) {
                return stay;
            }
            let turned = if action == Action::TurnLeft { heading.left() } else { heading.right() };
            map.road_neighbor(position, turned).map_or(stay, |c| (c, turned))
        }
    }
}

/// Scenario parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvConfig {
    pub width: usize,
    pub pursuers: usize,
    pub evaders: usize,
    pub horizon: u32,
    pub obs_size: usize,
    pub intersection_interval: usize,
    /// Forces every episode to use this evader strategy instead of drawing one.
    pub pinned_strategy: Option<StrategyTag>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            width: 13,
            pursuers: 8,
            evaders: 4,
            horizon: DEFAULT_HORIZON,
            obs_size: DEFAULT_OBS_SIZE,
            intersection_interval: 1,
            pinned_strategy: None,
        }
    }
}

impl EnvConfig {
    pub fn new(width: usize, pursuers: usize, evaders: usize) -> Self {
        Self { width, pursuers, evaders, ..Self::default() }
    }

    pub fn build_map(&self) -> Result<GridMap> {
        GridMap::with_interval(self.width, self.intersection_interval)
    }

    pub fn validate(&self) -> Result<GridMap> {
        let map = self.build_map()?;
        if self.pursuers == 0 {
            return Err(Error::InvalidConfig("at least one pursuer is required".into()));
        }
        if self.obs_size == 0 || self.obs_size.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("observation size must be odd, got {}", self.obs_size)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        let needed = self.pursuers + self.evaders;
        if needed > map.road_count() {
            return Err(Error::InvalidConfig(format!("{needed} vehicles do not fit on {} road cells", map.road_count())));
        }
        Ok(map)
    }

    /// Length of the flattened global state (three `width × width` planes).
    pub fn state_len(&self) -> usize {
        3 * self.width * self.width
    }
}

/// One capture event: evader `evader` caught by the listed pursuers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Capture {
    pub evader: usize,
    pub pursuers: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub per_agent_reward: Vec<f64>,
    pub global_reward: f64,
    pub captures: Vec<Capture>,
    pub done: bool,
}

/// Full simulator state. Evader behaviour is fixed at reset, so stepping is
/// a pure function of the state and the pursuer actions.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    map: GridMap,
    config: EnvConfig,
    pursuers: Vec<VehicleState>,
    evaders: Vec<VehicleState>,
    strategies: Vec<EvaderStrategy>,
    strategy: StrategyTag,
    t: u32,
}

impl WorldState {
    /// Fresh episode: vehicles on distinct random road cells with road-aligned
    /// headings, one evader strategy for the whole episode.
    pub fn reset(config: &EnvConfig, seed: u64) -> Result<Self> {
        let map = config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roads: Vec<Cell> = map.road_cells().collect();
        let picks = sample(&mut rng, roads.len(), config.pursuers + config.evaders);

        let spawn = |rng: &mut ChaCha8Rng, cell: Cell, kind: VehicleKind| {
            let headings = map.aligned_headings(cell);
            let heading = headings[rng.gen_range(0..headings.len())];
            VehicleState { position: cell, heading, kind, alive: true }
        };
        let cells: Vec<Cell> = picks.iter().map(|i| roads[i]).collect();
        let pursuers: Vec<VehicleState> = cells[..config.pursuers].iter().map(|&c| spawn(&mut rng, c, VehicleKind::Pursuer)).collect();
        let evaders: Vec<VehicleState> = cells[config.pursuers..].iter().map(|&c| spawn(&mut rng, c, VehicleKind::Evader)).collect();

        let strategy = match config.pinned_strategy {
            Some(tag) => tag,
            None => StrategyTag::ALL[rng.gen_range(0..StrategyTag::ALL.len())],
        };
        let strategies = evaders
            .iter()
            .map(|e| {
                let block = if strategy == StrategyTag::Circle {
                    let blocks = map.adjacent_blocks(e.position);
                    Some(blocks[rng.gen_range(0..blocks.len())])
                } else {
                    None
                };
                EvaderStrategy { tag: strategy, anchor: e.position, block }
            })
            .collect();

        Ok(Self { map, config: config.clone(), pursuers, evaders, strategies, strategy, t: 0 })
    }

    /// Hand-built state. Every vehicle must sit on a road cell; evaders use
    /// `strategy` (circle evaders orbit the first adjacent block).
    pub fn from_parts(
        config: &EnvConfig,
        pursuers: &[(Cell, Heading)],
        evaders: &[(Cell, Heading)],
        strategy: StrategyTag,
    ) -> Result<Self> {
        let mut cfg = config.clone();
        cfg.pursuers = pursuers.len();
        cfg.evaders = evaders.len();
        let map = cfg.validate()?;
        for &(c, _) in pursuers.iter().chain(evaders) {
            if !map.is_road(c) {
                return Err(Error::InvalidPosition { row: c.row, col: c.col, reason: "vehicles must be placed on road cells" });
            }
        }
        let mk = |&(position, heading): &(Cell, Heading), kind| VehicleState { position, heading, kind, alive: true };
        let pursuers: Vec<_> = pursuers.iter().map(|p| mk(p, VehicleKind::Pursuer)).collect();
        let evaders: Vec<_> = evaders.iter().map(|e| mk(e, VehicleKind::Evader)).collect();
        let strategies = evaders
            .iter()
            .map(|e| EvaderStrategy {
                tag: strategy,
                anchor: e.position,
                block: (strategy == StrategyTag::Circle).then(|| map.adjacent_blocks(e.position)[0]),
            })
            .collect();
        Ok(Self { map, config: cfg, pursuers, evaders, strategies, strategy, t: 0 })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn pursuers(&self) -> &[VehicleState] {
        &self.pursuers
    }

    pub fn evaders(&self) -> &[VehicleState] {
        &self.evaders
    }

    pub fn strategies(&self) -> &[EvaderStrategy] {
        &self.strategies
    }

    pub fn strategy(&self) -> StrategyTag {
        self.strategy
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn alive_evaders(&self) -> usize {
        self.evaders.iter().filter(|e| e.alive).count()
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.horizon || self.alive_evaders() == 0
    }

    /// Local view of pursuer `k`.
    pub fn observe(&self, k: usize) -> Result<PursuerObservation> {
        let p = self
            .pursuers
            .get(k)
            .ok_or_else(|| Error::Contract(format!("pursuer index {k} out of range for {} pursuers", self.pursuers.len())))?;
        let live = self.evaders.iter().filter(|e| e.alive).map(|e| e.position);
        PursuerObservation::build(&self.map, p.position, self.config.obs_size, live)
    }

    pub fn observe_all(&self) -> Result<Vec<PursuerObservation>> {
        (0..self.pursuers.len()).map(|k| self.observe(k)).collect()
    }

    /// Centralised state: channel-major planes of pursuer positions, live
    /// evader positions and buildings, each `width × width`, row-major.
    pub fn global_state(&self) -> Vec<f64> {
        let w = self.map.width();
        let plane = w * w;
        let mut s = vec![0.0; 3 * plane];
        for p in &self.pursuers {
            s[p.position.row * w + p.position.col] = 1.0;
        }
        for e in self.evaders.iter().filter(|e| e.alive) {
            s[plane + e.position.row * w + e.position.col] = 1.0;
        }
        for c in self.map.obstacle_cells() {
            s[2 * plane + c.row * w + c.col] = 1.0;
        }
        s
    }

    /// Advance one step: evaders move, then pursuers, then captures resolve.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepOutcome> {
        if actions.len() != self.pursuers.len() {
            return Err(Error::Contract(format!("expected {} pursuer actions, got {}", self.pursuers.len(), actions.len())));
        }
        if self.is_done() {
            return Err(Error::Contract("step called on a finished episode".into()));
        }

        for (e, s) in self.evaders.iter_mut().zip(&self.strategies) {
            if !e.alive {
                continue;
            }
            if let EvaderMove::Go(h) = evader_action(s, e, &self.map) {
                if let Some(next) = self.map.road_neighbor(e.position, h) {
                    e.position = next;
                    e.heading = h;
                }
            }
        }

        for (p, &a) in self.pursuers.iter_mut().zip(actions) {
            let (pos, heading) = apply_pursuer_action(&self.map, p.position, p.heading, a);
            p.position = pos;
            p.heading = heading;
        }

        let mut per_agent_reward = vec![0.0; self.pursuers.len()];
        let mut captures = Vec::new();
        for (m, e) in self.evaders.iter_mut().enumerate() {
            if !e.alive {
                continue;
            }
            let capturers: Vec<usize> =
                self.pursuers.iter().enumerate().filter(|(_, p)| p.position == e.position).map(|(k, _)| k).collect();
            if capturers.is_empty() {
                continue;
            }
            e.alive = false;
            // Shares of 1/n; the last capturer takes the exact remainder so the
            // shares of one capture always add up to exactly 1.
            let n = capturers.len();
            let share = 1.0 / n as f64;
            let mut given = 0.0;
            for (i, &k) in capturers.iter().enumerate() {
                let r = if i + 1 == n { 1.0 - given } else { share };
                given += r;
                per_agent_reward[k] += r;
            }
            captures.push(Capture { evader: m, pursuers: capturers });
        }

        self.t += 1;
        Ok(StepOutcome { per_agent_reward, global_reward: captures.len() as f64, captures, done: self.is_done() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(w: usize, p: usize, e: usize) -> EnvConfig {
        EnvConfig::new(w, p, e)
    }

    #[test]
    fn reset_is_deterministic() {
        let a = WorldState::reset(&cfg(13, 8, 4), 7).unwrap();
        let b = WorldState::reset(&cfg(13, 8, 4), 7).unwrap();
        assert_eq!(a, b);
        let c = WorldState::reset(&cfg(13, 8, 4), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reset_spawns_on_distinct_road_cells() {
        for seed in 0..50 {
            let w = WorldState::reset(&cfg(13, 8, 4), seed).unwrap();
            let mut cells: Vec<Cell> = w.pursuers().iter().chain(w.evaders()).map(|v| v.position).collect();
            assert!(cells.iter().all(|&c| w.map().is_road(c)));
            cells.sort();
            cells.dedup();
            assert_eq!(cells.len(), 12);
            for v in w.pursuers().iter().chain(w.evaders()) {
                assert!(w.map().aligned_headings(v.position).contains(&v.heading));
            }
        }
    }

    #[test]
    fn over_capacity_is_rejected() {
        assert!(matches!(WorldState::reset(&cfg(5, 30, 10), 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn global_state_channel_sums() {
        let w = WorldState::reset(&cfg(13, 8, 4), 3).unwrap();
        let s = w.global_state();
        let plane = 169;
        let sums: Vec<f64> = (0..3).map(|c| s[c * plane..(c + 1) * plane].iter().sum()).collect();
        // pursuers on distinct cells at t = 0
        assert_eq!(sums, [8.0, 4.0, 36.0]);
    }

    #[test]
    fn shared_capture_splits_reward() {
        let c = cfg(13, 2, 1);
        let mut w = WorldState::from_parts(
            &c,
            &[(Cell::new(6, 5), Heading::East), (Cell::new(6, 7), Heading::West)],
            &[(Cell::new(6, 6), Heading::North)],
            StrategyTag::Still,
        )
        .unwrap();
        let out = w.step(&[Action::Forward, Action::Forward]).unwrap();
        assert_eq!(out.per_agent_reward, [0.5, 0.5]);
        assert_eq!(out.global_reward, 1.0);
        assert_eq!(out.captures, [Capture { evader: 0, pursuers: alloc::vec![0, 1] }]);
        assert!(out.done);
        assert_eq!(w.global_state()[169..338].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn six_way_capture_is_exact() {
        let c = cfg(13, 6, 1);
        let start = (Cell::new(6, 5), Heading::East);
        let mut w = WorldState::from_parts(&c, &[start; 6], &[(Cell::new(6, 6), Heading::North)], StrategyTag::Still).unwrap();
        let out = w.step(&[Action::Forward; 6]).unwrap();
        assert_eq!(out.per_agent_reward.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn all_stop_only_advances_time() {
        let mut w = WorldState::reset(&EnvConfig { pinned_strategy: Some(StrategyTag::Still), ..cfg(13, 8, 4) }, 11).unwrap();
        let before = w.clone();
        let out = w.step(&[Action::Stop; 8]).unwrap();
        assert_eq!(out.global_reward, 0.0);
        assert!(out.per_agent_reward.iter().all(|&r| r == 0.0));
        assert_eq!(w.pursuers(), before.pursuers());
        assert_eq!(w.evaders(), before.evaders());
        assert_eq!(w.t(), 1);
    }

    #[test]
    fn turn_off_intersection_is_a_stop() {
        let map = GridMap::new(13).unwrap();
        let (p, h) = apply_pursuer_action(&map, Cell::new(6, 5), Heading::East, Action::TurnLeft);
        assert_eq!((p, h), (Cell::new(6, 5), Heading::East));
        let (p, h) = apply_pursuer_action(&map, Cell::new(6, 6), Heading::East, Action::TurnLeft);
        assert_eq!((p, h), (Cell::new(5, 6), Heading::North));
        let (p, h) = apply_pursuer_action(&map, Cell::new(6, 6), Heading::East, Action::Backward);
        assert_eq!((p, h), (Cell::new(6, 5), Heading::East));
    }

    #[test]
    fn wrong_action_count_and_finished_episode() {
        let mut w = WorldState::reset(&cfg(7, 2, 1), 0).unwrap();
        assert!(matches!(w.step(&[Action::Stop]), Err(Error::Contract(_))));
        for _ in 0..50 {
            if w.is_done() {
                break;
            }
            w.step(&[Action::Stop; 2]).unwrap();
        }
        assert!(w.is_done());
        assert_eq!(w.t(), 50);
        assert!(matches!(w.step(&[Action::Stop; 2]), Err(Error::Contract(_))));
    }
}
