use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::entity::{DoorId, Entity, EntityId, MatterState, RoomId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub name: String,
    pub entities: Vec<EntityId>,
    pub doors: Vec<DoorId>,
}

/// A door joins two rooms and carries one open/closed flag shared by both
/// sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub id: DoorId,
    pub rooms: [RoomId; 2],
    pub is_open: bool,
}

impl Door {
    pub fn other_side(&self, from: RoomId) -> RoomId {
        if self.rooms[0] == from {
            self.rooms[1]
        } else {
            self.rooms[0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Room(RoomId),
    Inventory,
    In(EntityId),
}

/// Last reading taken with a thermometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub temperature: f64,
    pub state: Option<MatterState>,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub entities: Vec<Entity>,
    locations: Vec<Location>,
    pub agent_room: RoomId,
    pub inventory: Vec<EntityId>,
    pub focused: Option<EntityId>,
    pub tick: u64,
    pub rng_seed: u64,
    pub measurements: BTreeMap<EntityId, Measurement>,
}

impl WorldState {
    pub fn new(rng_seed: u64) -> Self {
        WorldState {
            rooms: Vec::new(),
            doors: Vec::new(),
            entities: Vec::new(),
            locations: Vec::new(),
            agent_room: RoomId(0),
            inventory: Vec::new(),
            focused: None,
            tick: 0,
            rng_seed,
            measurements: BTreeMap::new(),
        }
    }

    pub fn add_room(&mut self, name: impl Into<String>) -> RoomId {
        let id = RoomId(self.rooms.len() as u32);
        self.rooms.push(Room {
            id,
            name: name.into(),
            entities: Vec::new(),
            doors: Vec::new(),
        });
        id
    }

    pub fn add_door(&mut self, a: RoomId, b: RoomId, is_open: bool) -> DoorId {
        let id = DoorId(self.doors.len() as u32);
        self.doors.push(Door {
            id,
            rooms: [a, b],
            is_open,
        });
        self.rooms[a.index()].doors.push(id);
        self.rooms[b.index()].doors.push(id);
        id
    }

    /// Adds `entity` at `location`, assigning it a fresh id.
    pub fn add_entity(&mut self, mut entity: Entity, location: Location) -> EntityId {
        let id = EntityId(self.entities.len() as u32);
        entity.id = id;
        entity.contents.clear();
        self.entities.push(entity);
        self.locations.push(location);
        self.children_mut(location).push(id);
        id
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut Entity {
        &mut self.entities[id.index()]
    }

    pub fn room(&self, id: RoomId) -> &Room {
        &self.rooms[id.index()]
    }

    pub fn door(&self, id: DoorId) -> &Door {
        &self.doors[id.index()]
    }

    pub fn location(&self, id: EntityId) -> Location {
        self.locations[id.index()]
    }

    pub fn children(&self, location: Location) -> &[EntityId] {
        match location {
            Location::Room(room) => &self.rooms[room.index()].entities,
            Location::Inventory => &self.inventory,
            Location::In(holder) => &self.entities[holder.index()].contents,
        }
    }

    fn children_mut(&mut self, location: Location) -> &mut Vec<EntityId> {
        match location {
            Location::Room(room) => &mut self.rooms[room.index()].entities,
            Location::Inventory => &mut self.inventory,
            Location::In(holder) => &mut self.entities[holder.index()].contents,
        }
    }

    /// Detaches `id` from its current parent and appends it to `to`.
    pub fn move_entity(&mut self, id: EntityId, to: Location) {
        let from = self.locations[id.index()];
        self.children_mut(from).retain(|&child| child != id);
        self.children_mut(to).push(id);
        self.locations[id.index()] = to;
    }

    pub fn room_id(&self, name: &str) -> Option<RoomId> {
        self.rooms.iter().find(|r| r.name == name).map(|r| r.id)
    }

    pub fn door_between(&self, a: RoomId, b: RoomId) -> Option<DoorId> {
        self.rooms[a.index()]
            .doors
            .iter()
            .copied()
            .find(|&d| self.doors[d.index()].other_side(a) == b)
    }

    /// Rooms reachable through one door from `room`, with the joining door.
    pub fn neighbors(&self, room: RoomId) -> impl Iterator<Item = (RoomId, DoorId)> + '_ {
        self.rooms[room.index()]
            .doors
            .iter()
            .map(move |&d| (self.doors[d.index()].other_side(room), d))
    }

    /// Holders of `id` from the innermost outwards.
    pub fn ancestors(&self, id: EntityId) -> Ancestors<'_> {
        Ancestors {
            state: self,
            current: self.location(id),
        }
    }

    /// True if `item` sits anywhere below `holder`.
    pub fn is_inside(&self, item: EntityId, holder: EntityId) -> bool {
        self.ancestors(item).any(|a| a == holder)
    }

    /// Room holding `id` (through any chain of holders), `None` if carried.
    pub fn room_of(&self, id: EntityId) -> Option<RoomId> {
        let mut location = self.location(id);
        loop {
            match location {
                Location::Room(room) => return Some(room),
                Location::Inventory => return None,
                Location::In(holder) => location = self.location(holder),
            }
        }
    }

    pub fn is_carried(&self, id: EntityId) -> bool {
        let mut location = self.location(id);
        loop {
            match location {
                Location::Room(_) => return false,
                Location::Inventory => return true,
                Location::In(holder) => location = self.location(holder),
            }
        }
    }

    /// Nearest holder that heats or cools its contents.
    pub fn temperature_device_of(&self, id: EntityId) -> Option<EntityId> {
        self.ancestors(id)
            .find(|&a| self.entity(a).heat_output.is_some())
    }

    /// Entities the agent can see and reach: everything in the current room
    /// and inventory, descending into receptacles that are not closed.
    pub fn visible_entities(&self) -> Vec<(EntityId, bool)> {
        let mut out = Vec::new();
        let mut queue: VecDeque<(EntityId, bool)> = VecDeque::new();
        for &id in &self.inventory {
            queue.push_back((id, true));
        }
        for &id in &self.rooms[self.agent_room.index()].entities {
            queue.push_back((id, false));
        }
        while let Some((id, carried)) = queue.pop_front() {
            out.push((id, carried));
            let entity = self.entity(id);
            if entity.is_accessible() {
                for &child in &entity.contents {
                    queue.push_back((child, carried));
                }
            }
        }
        out
    }

    pub fn find_entity(&self, name: &str) -> Option<EntityId> {
        self.entities.iter().find(|e| e.name == name).map(|e| e.id)
    }

    /// Checks the structural invariants: every entity sits in exactly one
    /// parent list that agrees with its recorded location, no containment
    /// cycles, door symmetry, open flags only on openable entities, and
    /// phases consistent with temperatures.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0usize; self.entities.len()];
        let mut visit = |ids: &[EntityId], expected: Location| -> Result<(), String> {
            for &id in ids {
                if id.index() >= self.entities.len() {
                    return Err(format!("dangling entity id {}", id.0));
                }
                seen[id.index()] += 1;
                if self.locations[id.index()] != expected {
                    return Err(format!(
                        "entity {} location disagrees with parent list",
                        id.0
                    ));
                }
            }
            Ok(())
        };
        for room in &self.rooms {
            visit(&room.entities, Location::Room(room.id))?;
        }
        visit(&self.inventory, Location::Inventory)?;
        for entity in &self.entities {
            visit(&entity.contents, Location::In(entity.id))?;
        }
        if let Some(id) = seen.iter().position(|&count| count != 1) {
            return Err(format!(
                "entity {} appears {} times in the containment tree",
                id, seen[id]
            ));
        }
        for entity in &self.entities {
            if self
                .ancestors(entity.id)
                .take(self.entities.len() + 1)
                .count()
                > self.entities.len()
            {
                return Err(format!("containment cycle through {}", entity.name));
            }
            if entity.openable != entity.is_open.is_some() {
                return Err(format!(
                    "{} has an open flag inconsistent with openable",
                    entity.name
                ));
            }
            if entity.switch.is_some() != entity.activated.is_some() {
                return Err(format!(
                    "{} has an activation flag without a switch",
                    entity.name
                ));
            }
            if let Some(material) = &entity.material {
                let expected = material.state_at(entity.temperature);
                if entity.matter_state != Some(expected) {
                    return Err(format!(
                        "{} phase inconsistent with temperature",
                        entity.name
                    ));
                }
            }
        }
        for door in &self.doors {
            for room in door.rooms {
                if !self.rooms[room.index()].doors.contains(&door.id) {
                    return Err(format!("door {} missing from one of its rooms", door.id.0));
                }
            }
        }
        if self.agent_room.index() >= self.rooms.len() {
            return Err("agent room out of range".to_string());
        }
        Ok(())
    }
}

pub struct Ancestors<'a> {
    state: &'a WorldState,
    current: Location,
}

impl Iterator for Ancestors<'_> {
    type Item = EntityId;

    fn next(&mut self) -> Option<EntityId> {
        match self.current {
            Location::In(holder) => {
                self.current = self.state.location(holder);
                Some(holder)
            }
            _ => None,
        }
    }
}
