//! The text world: state, physics, grammar and rendering.

pub mod entity;
pub mod layout;
pub mod messages;
pub mod parser;
pub mod render;
pub mod state;
pub mod step;
pub mod valid;

pub use entity::{
    DoorId, Entity, EntityId, Kind, Material, MatterState, Receptacle, RoomId, SwitchStyle,
};
pub use layout::{EntitySpec, WorldSpec};
pub use parser::{action_text, parse_action, Action, ParseResult, Target, Verb};
pub use render::{render_inventory, render_look};
pub use state::{Location, Measurement, WorldState};
pub use step::{assess, idle_tick, outcome_of, step, stepped, StepOutcome, StepResult};
pub use valid::{valid_actions, ValidAction};
