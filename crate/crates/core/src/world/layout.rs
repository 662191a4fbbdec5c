//! Declarative world definitions (rooms, doors, materials, entities).

use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;

use super::entity::{Entity, EntityId, Kind, Material, Receptacle, SwitchStyle};
use super::state::{Location, WorldState};
use crate::error::{Error, Result};

const DEFAULT_WORLD: &str = include_str!("../../data/world.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub start_room: String,
    pub ambient_temperature: f64,
    #[serde(rename = "material", default)]
    pub materials: Vec<Material>,
    #[serde(rename = "door", default)]
    pub doors: Vec<DoorSpec>,
    #[serde(rename = "room", default)]
    pub rooms: Vec<RoomSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorSpec {
    pub rooms: [String; 2],
    #[serde(default)]
    pub open: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub name: String,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub article: Option<String>,
    pub kind: Option<Kind>,
    #[serde(default)]
    pub portable: bool,
    #[serde(default)]
    pub openable: bool,
    #[serde(default)]
    pub open: bool,
    #[serde(default)]
    pub receptacle: Option<Receptacle>,
    #[serde(default)]
    pub switch: Option<SwitchStyle>,
    #[serde(default)]
    pub activated: bool,
    #[serde(default)]
    pub heat_output: Option<f64>,
    #[serde(default)]
    pub temperature_limit: Option<f64>,
    #[serde(default)]
    pub broken: bool,
    #[serde(default)]
    pub measures_temperature: bool,
    #[serde(default)]
    pub alive: bool,
    #[serde(default)]
    pub lifespan: Option<f64>,
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub material: Option<String>,
    #[serde(default)]
    pub contents: Vec<EntitySpec>,
}

impl WorldSpec {
    pub fn parse(source: &str, name: &str) -> Result<Self> {
        let spec: WorldSpec = toml::from_str(source).map_err(|e| Error::Data {
            name: name.to_string(),
            message: e.to_string(),
        })?;
        spec.validate(name)?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&source, &path.display().to_string())
    }

    /// The built-in house layout.
    pub fn builtin() -> &'static WorldSpec {
        static SPEC: OnceLock<WorldSpec> = OnceLock::new();
        SPEC.get_or_init(|| {
            WorldSpec::parse(DEFAULT_WORLD, "world.toml").expect("built-in world data is valid")
        })
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |message: String| Error::Data {
            name: name.to_string(),
            message,
        };
        let has_room = |room: &str| self.rooms.iter().any(|r| r.name == room);
        if !has_room(&self.start_room) {
            return Err(bad(format!(
                "start room {} is not defined",
                self.start_room
            )));
        }
        for door in &self.doors {
            for room in &door.rooms {
                if !has_room(room) {
                    return Err(bad(format!("door references unknown room {room}")));
                }
            }
            if door.rooms[0] == door.rooms[1] {
                return Err(bad(format!("door loops on {}", door.rooms[0])));
            }
        }
        fn check(
            spec: &EntitySpec,
            world: &WorldSpec,
            bad: &dyn Fn(String) -> Error,
        ) -> Result<()> {
            match (&spec.material, spec.kind) {
                (Some(material), _) if world.material(material).is_none() => {
                    return Err(bad(format!("unknown material {material}")));
                }
                (None, Some(Kind::Substance)) => {
                    return Err(bad("substance without material".into()))
                }
                (None, _) if spec.name.is_none() => {
                    return Err(bad("entity without a name".into()))
                }
                (None, None) => return Err(bad("entity without a kind".into())),
                _ => {}
            }
            if !spec.contents.is_empty() && spec.receptacle.is_none() {
                return Err(bad(format!(
                    "{:?} holds contents but is not a receptacle",
                    spec.name
                )));
            }
            spec.contents.iter().try_for_each(|c| check(c, world, bad))
        }
        for room in &self.rooms {
            for entity in &room.entities {
                check(entity, self, &bad)?;
            }
        }
        Ok(())
    }

    pub fn material(&self, id: &str) -> Option<&Material> {
        self.materials.iter().find(|m| m.id == id)
    }

    /// Instantiates the layout. Doors start closed unless marked open.
    pub fn build(&self, rng_seed: u64) -> Result<WorldState> {
        let mut state = WorldState::new(rng_seed);
        for room in &self.rooms {
            state.add_room(room.name.clone());
        }
        for door in &self.doors {
            let a = state.room_id(&door.rooms[0]).expect("validated");
            let b = state.room_id(&door.rooms[1]).expect("validated");
            state.add_door(a, b, door.open);
        }
        for room in &self.rooms {
            let id = state.room_id(&room.name).expect("validated");
            for entity in &room.entities {
                self.spawn(&mut state, entity, Location::Room(id))?;
            }
        }
        state.agent_room = state.room_id(&self.start_room).expect("validated");
        Ok(state)
    }

    /// Adds `spec` (and its nested contents) to `state` at `location`.
    pub fn spawn(
        &self,
        state: &mut WorldState,
        spec: &EntitySpec,
        location: Location,
    ) -> Result<EntityId> {
        let temperature = spec.temperature.unwrap_or(self.ambient_temperature);
        let mut entity = match &spec.material {
            Some(material_id) => {
                let material = self.material(material_id).ok_or_else(|| Error::Data {
                    name: "world".into(),
                    message: format!("unknown material {material_id}"),
                })?;
                Entity::substance(EntityId(0), material.clone(), temperature)
            }
            None => {
                let name = spec.name.clone().ok_or_else(|| Error::Data {
                    name: "world".into(),
                    message: "entity without a name".into(),
                })?;
                let mut e = Entity::new(EntityId(0), name, spec.kind.unwrap_or(Kind::Item));
                e.temperature = temperature;
                e
            }
        };
        if let Some(article) = &spec.article {
            entity.article = article.clone();
        }
        entity.portable = spec.portable;
        entity.openable = spec.openable;
        entity.is_open = spec.openable.then_some(spec.open);
        entity.receptacle = spec.receptacle;
        entity.switch = spec.switch;
        entity.activated = spec.switch.map(|_| spec.activated);
        entity.heat_output = spec.heat_output;
        entity.temperature_limit = spec.temperature_limit;
        entity.broken = spec.broken;
        entity.measures_temperature = spec.measures_temperature;
        entity.alive = spec.alive || matches!(spec.kind, Some(Kind::Creature) | Some(Kind::Plant));
        entity.lifespan = spec.lifespan;
        entity.text = spec.text.clone();
        let id = state.add_entity(entity, location);
        for child in &spec.contents {
            self.spawn(state, child, Location::In(id))?;
        }
        Ok(id)
    }
}
