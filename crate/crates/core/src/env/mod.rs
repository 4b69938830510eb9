//! Urban intersection grid with occluded pursuer views.

mod evader;
mod map;
mod observe;
mod world;

pub use evader::{evader_action, EvaderMove, EvaderStrategy, StrategyTag};
pub use map::{Cell, GridMap, Heading, RoadKind};
pub use observe::{observable_area, PursuerObservation};
pub use world::{
    apply_pursuer_action, Action, Capture, EnvConfig, StepOutcome, VehicleKind, VehicleState, WorldState, DEFAULT_HORIZON, DEFAULT_OBS_SIZE,
};
