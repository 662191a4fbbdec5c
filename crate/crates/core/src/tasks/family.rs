//! Generator families: parameter grids, per-variation worlds and the entity
//! bindings milestone roles refer to.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Role;
use crate::error::{Error, Result};
use crate::world::{
    EntityId, EntitySpec, Kind, Location, MatterState, Receptacle, RoomId, WorldSpec, WorldState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    Solid,
    Liquid,
    Gas,
    Any,
}

impl Goal {
    pub fn state(self) -> Option<MatterState> {
        match self {
            Goal::Solid => Some(MatterState::Solid),
            Goal::Liquid => Some(MatterState::Liquid),
            Goal::Gas => Some(MatterState::Gas),
            Goal::Any => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstanceParam {
    pub material: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThingParam {
    pub name: String,
    pub kind: Kind,
    pub rooms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimalParam {
    pub name: String,
    pub lifespan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Family {
    ChangeState {
        goal: Goal,
        rooms: Vec<String>,
        containers: Vec<String>,
        broken_stove: Vec<bool>,
        train: Vec<SubstanceParam>,
        eval: Vec<SubstanceParam>,
    },
    Thermometer {
        rooms: Vec<String>,
        containers: Vec<String>,
        thresholds: Vec<f64>,
        boxes: Vec<[String; 2]>,
        train: Vec<SubstanceParam>,
        eval: Vec<SubstanceParam>,
    },
    BoilingPoint {
        rooms: Vec<String>,
        containers: Vec<String>,
        thresholds: Vec<f64>,
        boxes: Vec<[String; 2]>,
        broken_stove: Vec<bool>,
        train: Vec<SubstanceParam>,
        eval: Vec<SubstanceParam>,
    },
    FindThing {
        living: bool,
        box_rooms: Vec<String>,
        box_colors: Vec<String>,
        train: Vec<ThingParam>,
        eval: Vec<ThingParam>,
    },
    Lifespan {
        room: String,
        per_variation: usize,
        train: Vec<AnimalParam>,
        eval: Vec<AnimalParam>,
    },
}

/// Which parameter pool a variation draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pool {
    Train,
    Eval,
}

impl Pool {
    pub fn name(self) -> &'static str {
        match self {
            Pool::Train => "train",
            Pool::Eval => "eval",
        }
    }
}

/// Concrete slot values of one variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Params {
    ChangeState {
        goal: Goal,
        material: String,
        temperature: f64,
        room: String,
        container: String,
        broken_stove: bool,
    },
    Thermometer {
        material: String,
        temperature: f64,
        room: String,
        container: String,
        threshold: f64,
        above_box: String,
        below_box: String,
    },
    BoilingPoint {
        material: String,
        temperature: f64,
        room: String,
        container: String,
        threshold: f64,
        above_box: String,
        below_box: String,
        broken_stove: bool,
    },
    FindThing {
        living: bool,
        thing: String,
        thing_kind: Kind,
        room: String,
        box_name: String,
        box_room: String,
    },
    Lifespan {
        room: String,
        animals: Vec<AnimalParam>,
    },
}

/// Entities and rooms of a built variation that milestones and the planner
/// refer to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Bindings {
    pub target: Option<EntityId>,
    pub container: Option<EntityId>,
    pub thermometer: Option<EntityId>,
    pub correct_box: Option<EntityId>,
    pub task_room: Option<RoomId>,
    pub goal: Option<Goal>,
    pub initial_state: Option<MatterState>,
    /// Things whose focus counts for "focus on an allowed thing".
    pub allowed_things: BTreeSet<EntityId>,
}

impl Family {
    /// Every distinct parameter tuple of `pool`, stratified so the first
    /// entries cycle through the pool's key values (target substance, thing,
    /// longest-lived animal). Within one key the order is shuffled with `rng`.
    pub fn grid(&self, pool: Pool, rng: &mut impl rand::Rng) -> Vec<Params> {
        let mut groups: Vec<Vec<Params>> = Vec::new();
        match self {
            Family::ChangeState {
                goal,
                rooms,
                containers,
                broken_stove,
                train,
                eval,
            } => {
                for s in pick(pool, train, eval) {
                    let mut group = Vec::new();
                    for room in rooms {
                        for container in containers {
                            for &broken in broken_stove {
                                group.push(Params::ChangeState {
                                    goal: *goal,
                                    material: s.material.clone(),
                                    temperature: s.temperature,
                                    room: room.clone(),
                                    container: container.clone(),
                                    broken_stove: broken,
                                });
                            }
                        }
                    }
                    groups.push(group);
                }
            }
            Family::Thermometer {
                rooms,
                containers,
                thresholds,
                boxes,
                train,
                eval,
            } => {
                for s in pick(pool, train, eval) {
                    let mut group = Vec::new();
                    for room in rooms {
                        for container in containers {
                            for &threshold in thresholds {
                                for (above, below) in box_orders(boxes) {
                                    group.push(Params::Thermometer {
                                        material: s.material.clone(),
                                        temperature: s.temperature,
                                        room: room.clone(),
                                        container: container.clone(),
                                        threshold,
                                        above_box: above,
                                        below_box: below,
                                    });
                                }
                            }
                        }
                    }
                    groups.push(group);
                }
            }
            Family::BoilingPoint {
                rooms,
                containers,
                thresholds,
                boxes,
                broken_stove,
                train,
                eval,
            } => {
                for s in pick(pool, train, eval) {
                    let mut group = Vec::new();
                    for room in rooms {
                        for container in containers {
                            for &threshold in thresholds {
                                for (above, below) in box_orders(boxes) {
                                    for &broken in broken_stove {
                                        group.push(Params::BoilingPoint {
                                            material: s.material.clone(),
                                            temperature: s.temperature,
                                            room: room.clone(),
                                            container: container.clone(),
                                            threshold,
                                            above_box: above.clone(),
                                            below_box: below.clone(),
                                            broken_stove: broken,
                                        });
                                    }
                                }
                            }
                        }
                    }
                    groups.push(group);
                }
            }
            Family::FindThing {
                living,
                box_rooms,
                box_colors,
                train,
                eval,
            } => {
                for thing in pick(pool, train, eval) {
                    let mut group = Vec::new();
                    for room in &thing.rooms {
                        for box_room in box_rooms {
                            for color in box_colors {
                                group.push(Params::FindThing {
                                    living: *living,
                                    thing: thing.name.clone(),
                                    thing_kind: thing.kind,
                                    room: room.clone(),
                                    box_name: format!("{color} box"),
                                    box_room: box_room.clone(),
                                });
                            }
                        }
                    }
                    groups.push(group);
                }
            }
            Family::Lifespan {
                room,
                per_variation,
                train,
                eval,
            } => {
                let animals = pick(pool, train, eval);
                let mut sorted: Vec<&AnimalParam> = animals.iter().collect();
                sorted.sort_by(|a, b| b.lifespan.total_cmp(&a.lifespan));
                for (rank, longest) in sorted.iter().enumerate() {
                    let rest = &sorted[rank + 1..];
                    let mut group = Vec::new();
                    for combo in combinations(rest.len(), per_variation.saturating_sub(1)) {
                        let mut chosen = vec![(*longest).clone()];
                        chosen.extend(combo.iter().map(|&i| rest[i].clone()));
                        group.push(Params::Lifespan {
                            room: room.clone(),
                            animals: chosen,
                        });
                    }
                    if !group.is_empty() {
                        groups.push(group);
                    }
                }
            }
        }
        for group in &mut groups {
            group.shuffle(rng);
        }
        interleave(groups)
    }

    pub fn pool_size(&self, pool: Pool) -> usize {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        self.grid(pool, &mut rng).len()
    }
}

fn pick<'a, T>(pool: Pool, train: &'a [T], eval: &'a [T]) -> &'a [T] {
    match pool {
        Pool::Train => train,
        Pool::Eval => eval,
    }
}

fn box_orders(boxes: &[[String; 2]]) -> Vec<(String, String)> {
    boxes
        .iter()
        .flat_map(|[a, b]| [(a.clone(), b.clone()), (b.clone(), a.clone())])
        .collect()
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            go(i + 1, n, k, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn interleave(groups: Vec<Vec<Params>>) -> Vec<Params> {
    let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for i in 0..longest {
        for group in &groups {
            if let Some(p) = group.get(i) {
                out.push(p.clone());
            }
        }
    }
    out
}

fn substance_spec(material: &str, temperature: f64) -> EntitySpec {
    EntitySpec {
        kind: Some(Kind::Substance),
        material: Some(material.to_string()),
        temperature: Some(temperature),
        ..Default::default()
    }
}

fn container_spec(name: &str, contents: Vec<EntitySpec>) -> EntitySpec {
    EntitySpec {
        name: Some(name.to_string()),
        kind: Some(Kind::Container),
        receptacle: Some(Receptacle::Containing),
        portable: true,
        contents,
        ..Default::default()
    }
}

fn room(world: &WorldState, name: &str) -> Result<RoomId> {
    world.room_id(name).ok_or_else(|| Error::Data {
        name: "tasks".into(),
        message: format!("unknown room {name}"),
    })
}

fn named(world: &WorldState, name: &str) -> Result<EntityId> {
    world.find_entity(name).ok_or_else(|| Error::Data {
        name: "tasks".into(),
        message: format!("world has no {name}"),
    })
}

fn break_stove(world: &mut WorldState, broken: bool) -> Result<()> {
    if broken {
        let stove = named(world, "stove")?;
        world.entity_mut(stove).broken = true;
    }
    Ok(())
}

/// Spawns a container holding the target substance in `room_name`.
fn place_substance(
    spec: &WorldSpec,
    world: &mut WorldState,
    room_name: &str,
    container: &str,
    material: &str,
    temperature: f64,
) -> Result<(EntityId, EntityId)> {
    let room_id = room(world, room_name)?;
    let holder = spec.spawn(
        world,
        &container_spec(container, vec![substance_spec(material, temperature)]),
        Location::Room(room_id),
    )?;
    let target = world.entity(holder).contents[0];
    Ok((holder, target))
}

fn place_box(
    spec: &WorldSpec,
    world: &mut WorldState,
    room_name: &str,
    name: &str,
) -> Result<EntityId> {
    let room_id = room(world, room_name)?;
    let mut box_spec = container_spec(name, Vec::new());
    box_spec.portable = false;
    spec.spawn(world, &box_spec, Location::Room(room_id))
}

fn place_boxes(
    spec: &WorldSpec,
    world: &mut WorldState,
    room_name: &str,
    names: [&str; 2],
) -> Result<[EntityId; 2]> {
    Ok([
        place_box(spec, world, room_name, names[0])?,
        place_box(spec, world, room_name, names[1])?,
    ])
}

impl Params {
    /// Builds the variation's initial world on top of the base layout.
    pub fn build(&self, spec: &WorldSpec, seed: u64) -> Result<(WorldState, Bindings)> {
        let mut world = spec.build(seed)?;
        let mut b = Bindings::default();
        match self {
            Params::ChangeState {
                goal,
                material,
                temperature,
                room: room_name,
                container,
                broken_stove,
            } => {
                let (holder, target) = place_substance(
                    spec,
                    &mut world,
                    room_name,
                    container,
                    material,
                    *temperature,
                )?;
                break_stove(&mut world, *broken_stove)?;
                b.target = Some(target);
                b.container = Some(holder);
                b.goal = Some(*goal);
                b.initial_state = world.entity(target).matter_state;
            }
            Params::Thermometer {
                material,
                temperature,
                room: room_name,
                container,
                threshold,
                above_box,
                below_box,
            } => {
                let (holder, target) = place_substance(
                    spec,
                    &mut world,
                    room_name,
                    container,
                    material,
                    *temperature,
                )?;
                let [above, below] =
                    place_boxes(spec, &mut world, room_name, [above_box, below_box])?;
                b.target = Some(target);
                b.container = Some(holder);
                b.thermometer = Some(named(&world, "thermometer")?);
                b.correct_box = Some(if *temperature > *threshold {
                    above
                } else {
                    below
                });
                b.task_room = Some(room(&world, room_name)?);
                b.initial_state = world.entity(target).matter_state;
            }
            Params::BoilingPoint {
                material,
                temperature,
                room: room_name,
                container,
                threshold,
                above_box,
                below_box,
                broken_stove,
            } => {
                let (holder, target) = place_substance(
                    spec,
                    &mut world,
                    room_name,
                    container,
                    material,
                    *temperature,
                )?;
                let [above, below] =
                    place_boxes(spec, &mut world, "kitchen", [above_box, below_box])?;
                break_stove(&mut world, *broken_stove)?;
                let boiling_point =
                    world
                        .entity(target)
                        .boiling_point()
                        .ok_or_else(|| Error::Data {
                            name: "tasks".into(),
                            message: format!("{material} has no boiling point"),
                        })?;
                b.target = Some(target);
                b.container = Some(holder);
                b.thermometer = Some(named(&world, "thermometer")?);
                b.correct_box = Some(if boiling_point > *threshold {
                    above
                } else {
                    below
                });
                b.goal = Some(Goal::Gas);
                b.initial_state = world.entity(target).matter_state;
            }
            Params::FindThing {
                living,
                thing,
                thing_kind,
                room: room_name,
                box_name,
                box_room,
            } => {
                let thing_spec = EntitySpec {
                    name: Some(thing.clone()),
                    kind: Some(*thing_kind),
                    portable: true,
                    ..Default::default()
                };
                let thing_room = room(&world, room_name)?;
                let target = spec.spawn(&mut world, &thing_spec, Location::Room(thing_room))?;
                let the_box = place_box(spec, &mut world, box_room, box_name)?;
                b.target = Some(target);
                b.correct_box = Some(the_box);
                b.task_room = Some(room(&world, box_room)?);
                b.allowed_things = world
                    .entities
                    .iter()
                    .filter(|e| e.alive == *living && e.id != the_box)
                    .map(|e| e.id)
                    .collect();
            }
            Params::Lifespan {
                room: room_name,
                animals,
            } => {
                let room_id = room(&world, room_name)?;
                let mut best: Option<(f64, EntityId)> = None;
                for animal in animals {
                    let id = spec.spawn(
                        &mut world,
                        &EntitySpec {
                            name: Some(animal.name.clone()),
                            kind: Some(Kind::Creature),
                            lifespan: Some(animal.lifespan),
                            ..Default::default()
                        },
                        Location::Room(room_id),
                    )?;
                    if best.is_none_or(|(l, _)| animal.lifespan > l) {
                        best = Some((animal.lifespan, id));
                    }
                }
                b.target = best.map(|(_, id)| id);
                b.task_room = Some(room_id);
            }
        }
        Ok((world, b))
    }

    /// Slot values for the description template.
    pub fn slots(&self, world: &WorldState, b: &Bindings) -> Vec<(&'static str, String)> {
        let target_name = b
            .target
            .map(|t| world.entity(t).name.clone())
            .unwrap_or_default();
        match self {
            Params::ChangeState { .. } => vec![("substance", target_name)],
            Params::Thermometer {
                room,
                threshold,
                above_box,
                below_box,
                ..
            }
            | Params::BoilingPoint {
                room,
                threshold,
                above_box,
                below_box,
                ..
            } => vec![
                ("substance", target_name),
                ("room", room.clone()),
                ("threshold", format!("{threshold:.1}")),
                ("above_box", above_box.clone()),
                ("below_box", below_box.clone()),
            ],
            Params::FindThing {
                box_name, box_room, ..
            } => {
                vec![("box", box_name.clone()), ("box_room", box_room.clone())]
            }
            Params::Lifespan { room, .. } => vec![("room", room.clone())],
        }
    }
}

/// Entity a focus-type role refers to, for the allowed-focus set.
pub fn focus_entity(role: Role, b: &Bindings) -> Option<EntityId> {
    match role {
        Role::FocusTarget => b.target,
        Role::FocusThermometer => b.thermometer,
        Role::FocusCorrectBox => b.correct_box,
        _ => None,
    }
}
