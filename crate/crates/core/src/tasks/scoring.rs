//! Milestone conditions, latching and the two failure conventions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::world::{EntityId, MatterState, RoomId, WorldState};

/// A predicate over the world state, compiled from a milestone role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Condition {
    Focused {
        entity: EntityId,
    },
    FocusedOneOf {
        entities: BTreeSet<EntityId>,
    },
    FocusedInInventory,
    FocusedInside {
        holder: EntityId,
    },
    AgentIn {
        room: RoomId,
    },
    /// Nearest temperature device above the entity is a heater.
    OnHeater {
        entity: EntityId,
    },
    UnderActiveHeater {
        entity: EntityId,
    },
    UnderActiveCooler {
        entity: EntityId,
    },
    UnderActiveDevice {
        entity: EntityId,
    },
    InState {
        entity: EntityId,
        state: MatterState,
    },
    NotInState {
        entity: EntityId,
        state: MatterState,
    },
    Measured {
        entity: EntityId,
    },
    MeasuredInState {
        entity: EntityId,
        state: MatterState,
    },
}

impl Condition {
    pub fn holds(&self, world: &WorldState) -> bool {
        let device =
            |entity: EntityId| world.temperature_device_of(entity).map(|d| world.entity(d));
        match self {
            Condition::Focused { entity } => world.focused == Some(*entity),
            Condition::FocusedOneOf { entities } => {
                world.focused.is_some_and(|f| entities.contains(&f))
            }
            Condition::FocusedInInventory => world.focused.is_some_and(|f| world.is_carried(f)),
            Condition::FocusedInside { holder } => {
                world.focused.is_some_and(|f| world.is_inside(f, *holder))
            }
            Condition::AgentIn { room } => world.agent_room == *room,
            Condition::OnHeater { entity } => device(*entity).is_some_and(|d| d.is_heater()),
            Condition::UnderActiveHeater { entity } => {
                device(*entity).is_some_and(|d| d.is_heater() && d.drives_temperature())
            }
            Condition::UnderActiveCooler { entity } => {
                device(*entity).is_some_and(|d| d.is_cooler() && d.drives_temperature())
            }
            Condition::UnderActiveDevice { entity } => {
                device(*entity).is_some_and(|d| d.drives_temperature())
            }
            Condition::InState { entity, state } => {
                world.entity(*entity).matter_state == Some(*state)
            }
            Condition::NotInState { entity, state } => {
                world.entity(*entity).matter_state != Some(*state)
            }
            Condition::Measured { entity } => world.measurements.contains_key(entity),
            Condition::MeasuredInState { entity, state } => world
                .measurements
                .get(entity)
                .is_some_and(|m| m.state == Some(*state)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub label: String,
    pub condition: Condition,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FailCondition {
    /// The agent focused on something outside `allowed`.
    FocusOutside { allowed: BTreeSet<EntityId> },
}

impl FailCondition {
    pub fn fires(&self, world: &WorldState) -> bool {
        match self {
            FailCondition::FocusOutside { allowed } => {
                world.focused.is_some_and(|f| !allowed.contains(&f))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoring {
    pub milestones: Vec<Milestone>,
    pub fails: Vec<FailCondition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FailConvention {
    #[default]
    ZeroOnFail,
    LastScoreOnFail,
}

impl FailConvention {
    pub fn name(self) -> &'static str {
        match self {
            FailConvention::ZeroOnFail => "zero-on-fail",
            FailConvention::LastScoreOnFail => "last-score-on-fail",
        }
    }
}

impl std::str::FromStr for FailConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-on-fail" => Ok(FailConvention::ZeroOnFail),
            "last-score-on-fail" => Ok(FailConvention::LastScoreOnFail),
            other => Err(format!("unknown scoring convention {other}")),
        }
    }
}

/// Running milestone state for one episode. Milestones latch in order: one
/// can be earned only after every earlier one, and several may latch in the
/// same observation. Once a fail condition fires nothing else latches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTracker {
    earned: Vec<bool>,
    points: u32,
    failed: bool,
}

impl ScoreTracker {
    pub fn new(scoring: &Scoring) -> Self {
        ScoreTracker {
            earned: vec![false; scoring.milestones.len()],
            points: 0,
            failed: false,
        }
    }

    /// Feeds one observed state; returns the points gained.
    pub fn observe(&mut self, scoring: &Scoring, world: &WorldState) -> u32 {
        if self.failed {
            return 0;
        }
        if scoring.fails.iter().any(|f| f.fires(world)) {
            self.failed = true;
            return 0;
        }
        let before = self.points;
        for (i, milestone) in scoring.milestones.iter().enumerate() {
            if self.earned[i] {
                continue;
            }
            if !milestone.condition.holds(world) {
                break;
            }
            self.earned[i] = true;
            self.points += milestone.points;
        }
        self.points - before
    }

    /// Points earned so far (before any failure).
    pub fn raw_points(&self) -> u32 {
        self.points
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    pub fn won(&self) -> bool {
        !self.failed && self.earned.iter().all(|&e| e)
    }

    pub fn finished(&self) -> bool {
        self.failed || self.won()
    }

    pub fn earned(&self) -> &[bool] {
        &self.earned
    }

    pub fn score(&self, convention: FailConvention) -> u32 {
        match (self.failed, convention) {
            (true, FailConvention::ZeroOnFail) => 0,
            _ => self.points,
        }
    }
}

/// Final score of a state history under `convention`.
pub fn score(history: &[WorldState], scoring: &Scoring, convention: FailConvention) -> u32 {
    let mut tracker = ScoreTracker::new(scoring);
    for world in history {
        tracker.observe(scoring, world);
        if tracker.finished() {
            break;
        }
    }
    tracker.score(convention)
}
