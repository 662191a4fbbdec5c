//! Verb semantics, refusals and the per-tick physics.

use serde::{Deserialize, Serialize};

use super::entity::{EntityId, Kind};
use super::messages::{fill, messages};
use super::parser::{Action, Target, Verb};
use super::render::{
    describe_door, describe_full, format_temperature, list_brief, render_inventory, render_look,
};
use super::state::{Location, Measurement, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOutcome {
    Executed,
    AffordanceViolation,
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepResult {
    pub outcome: StepOutcome,
    pub observation: String,
}

/// An action that would not change the world, with the reply it gets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Refusal {
    pub outcome: StepOutcome,
    pub message: String,
}

fn violation(message: String) -> Refusal {
    Refusal {
        outcome: StepOutcome::AffordanceViolation,
        message,
    }
}

fn redundant(message: String) -> Refusal {
    Refusal {
        outcome: StepOutcome::Redundant,
        message,
    }
}

fn named(template: &str, name: &str) -> String {
    fill(template, &[("name", name)])
}

fn holder_msg(template: &str, name: &str, holder: &str) -> String {
    fill(template, &[("name", name), ("holder", holder)])
}

/// Outcome `action` would have without changing anything.
pub fn outcome_of(state: &WorldState, action: &Action) -> StepOutcome {
    match assess(state, action) {
        Ok(()) => StepOutcome::Executed,
        Err(refusal) => refusal.outcome,
    }
}

/// Checks whether `action` executes. Refusals carry the observation text.
pub fn assess(state: &WorldState, action: &Action) -> Result<(), Refusal> {
    let m = messages();
    let arg = |i: usize| action.args[i];
    let entity_arg = |i: usize| action.entity(i).map(|id| state.entity(id));
    match action.verb {
        Verb::LookAround | Verb::Inventory | Verb::Wait | Verb::LookAt => Ok(()),
        Verb::LookIn => match entity_arg(0) {
            Some(e) if e.receptacle.is_some() && e.is_accessible() => Ok(()),
            Some(e) if e.receptacle.is_some() => {
                Err(violation(fill(&m.holder_closed, &[("holder", &e.name)])))
            }
            _ => Err(violation(m.cannot_look_inside.clone())),
        },
        Verb::Open | Verb::Close => {
            let opening = action.verb == Verb::Open;
            match arg(0) {
                Target::Door(door) => match (state.door(door).is_open, opening) {
                    (true, true) => Err(redundant(m.door_already_open.clone())),
                    (false, false) => Err(redundant(m.door_already_closed.clone())),
                    _ => Ok(()),
                },
                Target::Entity(id) => {
                    let e = state.entity(id);
                    match (e.is_open, opening) {
                        (None, true) => Err(violation(m.cannot_open.clone())),
                        (None, false) => Err(violation(m.cannot_close.clone())),
                        (Some(true), true) => Err(redundant(named(&m.already_open, &e.name))),
                        (Some(false), false) => Err(redundant(named(&m.already_closed, &e.name))),
                        _ => Ok(()),
                    }
                }
                Target::Room(_) => Err(violation(if opening {
                    m.cannot_open.clone()
                } else {
                    m.cannot_close.clone()
                })),
            }
        }
        Verb::GoTo => match arg(0) {
            Target::Room(room) => match state.door_between(state.agent_room, room) {
                Some(door) if state.door(door).is_open => Ok(()),
                Some(_) => Err(violation(fill(
                    &m.door_blocks_path,
                    &[("room", &state.room(room).name)],
                ))),
                None => Err(violation(m.cannot_go.clone())),
            },
            _ => Err(violation(m.cannot_go.clone())),
        },
        Verb::PickUp => match entity_arg(0) {
            Some(e) if state.location(e.id) == Location::Inventory => {
                Err(redundant(named(&m.already_carried, &e.name)))
            }
            Some(e) if e.portable => Ok(()),
            _ => Err(violation(m.cannot_pick_up.clone())),
        },
        Verb::PutIn => {
            let (Some(item), Some(holder)) = (entity_arg(0), entity_arg(1)) else {
                return Err(violation(m.cannot_move.clone()));
            };
            if !item.portable {
                return Err(violation(m.cannot_move.clone()));
            }
            check_holder(state, item.id, holder.id)?;
            if state.location(item.id) == Location::In(holder.id) {
                return Err(redundant(holder_msg(
                    &m.already_inside,
                    &item.name,
                    &holder.name,
                )));
            }
            Ok(())
        }
        Verb::FocusOn => match arg(0) {
            Target::Entity(id) if state.focused == Some(id) => {
                Err(redundant(named(&m.already_focused, &state.entity(id).name)))
            }
            Target::Entity(_) => Ok(()),
            _ => Err(violation(m.cannot_focus.clone())),
        },
        Verb::Activate => match entity_arg(0) {
            Some(e) if e.activated.is_none() => Err(violation(m.cannot_activate.clone())),
            Some(e) if e.broken => Err(violation(named(&m.broken, &e.name))),
            Some(e) if e.activated == Some(true) => {
                Err(redundant(named(&m.already_activated, &e.name)))
            }
            Some(_) => Ok(()),
            None => Err(violation(m.cannot_activate.clone())),
        },
        Verb::Deactivate => match entity_arg(0) {
            Some(e) if e.activated == Some(true) => Ok(()),
            Some(e) if e.activated == Some(false) => {
                Err(redundant(named(&m.already_deactivated, &e.name)))
            }
            _ => Err(violation(m.cannot_deactivate.clone())),
        },
        Verb::UseOn => match (entity_arg(0), entity_arg(1)) {
            (Some(tool), Some(subject)) if tool.measures_temperature && tool.id != subject.id => {
                Ok(())
            }
            _ => Err(violation(m.cannot_use.clone())),
        },
        Verb::PourInto => {
            let (Some(source), Some(holder)) = (entity_arg(0), entity_arg(1)) else {
                return Err(violation(m.cannot_pour.clone()));
            };
            if source.kind == Kind::Substance {
                check_pour_target(state, source.id, holder.id)?;
                if state.location(source.id) == Location::In(holder.id) {
                    return Err(redundant(holder_msg(
                        &m.already_inside,
                        &source.name,
                        &holder.name,
                    )));
                }
                Ok(())
            } else if source.receptacle.is_some() && source.portable {
                check_pour_target(state, source.id, holder.id)?;
                if !source.is_accessible() || source.contents.is_empty() {
                    return Err(redundant(named(&m.nothing_to_pour, &source.name)));
                }
                Ok(())
            } else {
                Err(violation(m.cannot_pour.clone()))
            }
        }
        Verb::Mix => match entity_arg(0) {
            Some(e) if e.receptacle.is_some() => {
                let substances = e
                    .contents
                    .iter()
                    .filter(|&&c| state.entity(c).kind == Kind::Substance)
                    .count();
                if e.is_accessible() && substances >= 2 {
                    Ok(())
                } else {
                    Err(redundant(named(&m.nothing_to_mix, &e.name)))
                }
            }
            _ => Err(violation(m.cannot_mix.clone())),
        },
        Verb::Read => match entity_arg(0) {
            Some(e) if e.text.is_some() => Ok(()),
            Some(e) => Err(violation(named(&m.nothing_written, &e.name))),
            None => Err(violation(named(&m.nothing_written, "door"))),
        },
    }
}

fn check_holder(state: &WorldState, item: EntityId, holder: EntityId) -> Result<(), Refusal> {
    let m = messages();
    let h = state.entity(holder);
    if h.receptacle.is_none() {
        return Err(violation(fill(&m.not_a_receptacle, &[("holder", &h.name)])));
    }
    if !h.is_accessible() {
        return Err(violation(fill(&m.holder_closed, &[("holder", &h.name)])));
    }
    if item == holder || state.is_inside(holder, item) {
        return Err(violation(m.inside_itself.clone()));
    }
    Ok(())
}

fn check_pour_target(
    state: &WorldState,
    source: EntityId,
    holder: EntityId,
) -> Result<(), Refusal> {
    let m = messages();
    let h = state.entity(holder);
    if h.receptacle.is_none() || h.kind == Kind::Substance {
        return Err(violation(fill(&m.cannot_pour_into, &[("holder", &h.name)])));
    }
    check_holder(state, source, holder)
}

/// Advances the clock by one tick without acting (unparsed commands).
pub fn idle_tick(state: &mut WorldState) {
    state.tick += 1;
}

/// Applies `action`, consuming one tick. Physics runs only when the action
/// executes; refusals leave everything but the clock untouched.
pub fn step(state: &mut WorldState, action: &Action) -> StepResult {
    state.tick += 1;
    if let Err(refusal) = assess(state, action) {
        return StepResult {
            outcome: refusal.outcome,
            observation: refusal.message,
        };
    }
    let observation = apply(state, action);
    physics(state);
    let observation = match action.verb {
        Verb::LookAround => render_look(state),
        _ => observation,
    };
    StepResult {
        outcome: StepOutcome::Executed,
        observation,
    }
}

/// Pure variant of [`step`].
pub fn stepped(state: &WorldState, action: &Action) -> (WorldState, StepResult) {
    let mut next = state.clone();
    let result = step(&mut next, action);
    (next, result)
}

fn apply(state: &mut WorldState, action: &Action) -> String {
    let m = messages();
    let entity = |i: usize| action.entity(i).expect("assessed entity argument");
    match action.verb {
        Verb::LookAround => String::new(),
        Verb::Inventory => render_inventory(state),
        Verb::Wait => m.waited.clone(),
        Verb::LookAt => match action.args[0] {
            Target::Entity(id) => describe_full(state, id),
            Target::Door(door) => describe_door(state, door, state.agent_room),
            Target::Room(room) => format!("the {}", state.room(room).name),
        },
        Verb::LookIn => {
            let e = state.entity(entity(0));
            fill(
                &m.look_inside,
                &[
                    ("name", &e.name),
                    ("contents", &list_brief(state, &e.contents)),
                ],
            )
        }
        Verb::Open | Verb::Close => {
            let opening = action.verb == Verb::Open;
            match action.args[0] {
                Target::Door(door) => {
                    state.doors[door.index()].is_open = opening;
                    if opening {
                        m.door_now_open.clone()
                    } else {
                        m.door_now_closed.clone()
                    }
                }
                _ => {
                    let e = state.entity_mut(entity(0));
                    e.is_open = Some(opening);
                    named(if opening { &m.now_open } else { &m.now_closed }, &e.name)
                }
            }
        }
        Verb::GoTo => {
            let Target::Room(room) = action.args[0] else {
                unreachable!("assessed")
            };
            state.agent_room = room;
            fill(&m.moved_to_room, &[("room", &state.room(room).name)])
        }
        Verb::PickUp => {
            let id = entity(0);
            state.move_entity(id, Location::Inventory);
            named(&m.picked_up, &state.entity(id).name)
        }
        Verb::PutIn => {
            let (item, holder) = (entity(0), entity(1));
            state.move_entity(item, Location::In(holder));
            holder_msg(
                &m.moved_into,
                &state.entity(item).name,
                &state.entity(holder).name,
            )
        }
        Verb::FocusOn => {
            let id = entity(0);
            state.focused = Some(id);
            named(&m.focused, &state.entity(id).name)
        }
        Verb::Activate | Verb::Deactivate => {
            let on = action.verb == Verb::Activate;
            let e = state.entity_mut(entity(0));
            e.activated = Some(on);
            named(if on { &m.activated } else { &m.deactivated }, &e.name)
        }
        Verb::UseOn => {
            let (tool, subject) = (entity(0), entity(1));
            let temperature = state.entity(subject).temperature;
            let reading = Measurement {
                temperature,
                state: state.entity(subject).matter_state,
                tick: state.tick,
            };
            state.measurements.insert(subject, reading);
            state.entity_mut(tool).temperature = temperature;
            fill(
                &m.measured,
                &[
                    ("name", &state.entity(subject).name),
                    ("temperature", &format_temperature(temperature)),
                ],
            )
        }
        Verb::PourInto => {
            let (source, holder) = (entity(0), entity(1));
            let holder_name = state.entity(holder).name.clone();
            if state.entity(source).kind == Kind::Substance {
                state.move_entity(source, Location::In(holder));
                holder_msg(&m.poured, &state.entity(source).name, &holder_name)
            } else {
                for item in state.entity(source).contents.clone() {
                    state.move_entity(item, Location::In(holder));
                }
                holder_msg(&m.poured_contents, &state.entity(source).name, &holder_name)
            }
        }
        Verb::Mix => named(&m.mixed, &state.entity(entity(0)).name),
        Verb::Read => {
            let e = state.entity(entity(0));
            fill(
                &m.reads,
                &[("name", &e.name), ("text", e.text.as_deref().unwrap_or(""))],
            )
        }
    }
}

/// One tick of heat transfer: everything whose nearest temperature device is
/// running moves by the device's rate, never past its limit.
pub fn physics(state: &mut WorldState) {
    for i in 0..state.entities.len() {
        let id = EntityId(i as u32);
        let Some(device) = state.temperature_device_of(id) else {
            continue;
        };
        let device = state.entity(device);
        if !device.drives_temperature() {
            continue;
        }
        let rate = device.heat_output.unwrap_or(0.0);
        let limit = device.temperature_limit;
        let e = state.entity_mut(id);
        let mut t = e.temperature + rate;
        if let Some(limit) = limit {
            if rate > 0.0 {
                t = t.min(limit.max(e.temperature));
            } else {
                t = t.max(limit.min(e.temperature));
            }
        }
        e.temperature = t;
        e.refresh_phase();
    }
}
