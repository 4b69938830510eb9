use super::map::{Cell, GridMap, Heading};
use super::world::VehicleState;

/// The four scripted evader behaviours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StrategyTag {
    /// Never moves.
    Still,
    /// Shuttles east-west along its row.
    LatLoop,
    /// Shuttles north-south along its column.
    LongLoop,
    /// Circles one adjacent building block clockwise.
    Circle,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 4] = [StrategyTag::Still, StrategyTag::LatLoop, StrategyTag::LongLoop, StrategyTag::Circle];

    pub fn name(self) -> &'static str {
        match self {
            StrategyTag::Still => "still",
            StrategyTag::LatLoop => "lat-loop",
            StrategyTag::LongLoop => "long-loop",
            StrategyTag::Circle => "circle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

/// Per-evader plan for the episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvaderStrategy {
    pub tag: StrategyTag,
    /// Spawn cell.
    pub anchor: Cell,
    /// Top-left cell of the block circled by [`StrategyTag::Circle`].
    pub block: Option<Cell>,
}

/// What an evader does this step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvaderMove {
    Stay,
    Go(Heading),
}

/// Next move of a live evader. Loops reverse when blocked and stay put when
/// blocked both ways; the vehicle's heading carries the loop direction.
pub fn evader_action(strategy: &EvaderStrategy, evader: &VehicleState, map: &GridMap) -> EvaderMove {
    match strategy.tag {
        StrategyTag::Still => EvaderMove::Stay,
        StrategyTag::LatLoop => shuttle(evader, map, true),
        StrategyTag::LongLoop => shuttle(evader, map, false),
        StrategyTag::Circle => {
            let Some(block) = strategy.block else { return EvaderMove::Stay };
            let Ok(ring) = map.ring(block) else { return EvaderMove::Stay };
            let Some(i) = ring.iter().position(|&c| c == evader.position) else {
                return EvaderMove::Stay;
            };
            let next = ring[(i + 1) % ring.len()];
            Heading::ALL.into_iter().find(|&h| map.neighbor(evader.position, h) == Some(next)).map_or(EvaderMove::Stay, EvaderMove::Go)
        }
    }
}

fn shuttle(evader: &VehicleState, map: &GridMap, horizontal: bool) -> EvaderMove {
    let dir = if evader.heading.is_horizontal() == horizontal {
        evader.heading
    } else if horizontal {
        Heading::East
    } else {
        Heading::South
    };
    if map.road_neighbor(evader.position, dir).is_some() {
        EvaderMove::Go(dir)
    } else if map.road_neighbor(evader.position, dir.opposite()).is_some() {
        EvaderMove::Go(dir.opposite())
    } else {
        EvaderMove::Stay
    }
}
