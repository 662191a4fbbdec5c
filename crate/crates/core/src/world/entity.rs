use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RoomId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DoorId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RoomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl DoorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Device,
    Container,
    Substance,
    Creature,
    Plant,
    Furniture,
    /// Plain portable or decorative objects (fruit, tools, pictures).
    Item,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatterState {
    Solid,
    Liquid,
    Gas,
}

impl MatterState {
    pub fn name(self) -> &'static str {
        match self {
            MatterState::Solid => "solid",
            MatterState::Liquid => "liquid",
            MatterState::Gas => "gas",
        }
    }

    /// Phase at `temperature`: solid below the melting point, gas above the
    /// boiling point, liquid otherwise.
    pub fn at(temperature: f64, melting_point: Option<f64>, boiling_point: Option<f64>) -> Self {
        if melting_point.is_some_and(|mp| temperature < mp) {
            MatterState::Solid
        } else if boiling_point.is_some_and(|bp| temperature > bp) {
            MatterState::Gas
        } else {
            MatterState::Liquid
        }
    }
}

/// How an entity holds other entities, which also fixes the rendering
/// ("On the stove is", "In the sink is", "a cup (containing ...)").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Receptacle {
    In,
    On,
    Containing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchStyle {
    /// "turned on" / "turned off"
    Turned,
    /// "activated" / "deactivated"
    Activated,
}

impl SwitchStyle {
    pub fn describe(self, on: bool) -> &'static str {
        match (self, on) {
            (SwitchStyle::Turned, true) => "turned on",
            (SwitchStyle::Turned, false) => "turned off",
            (SwitchStyle::Activated, true) => "activated",
            (SwitchStyle::Activated, false) => "deactivated",
        }
    }
}

/// Names and phase-change points of a material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub id: String,
    pub solid_name: String,
    pub liquid_name: String,
    pub gas_name: String,
    #[serde(default)]
    pub melting_point: Option<f64>,
    #[serde(default)]
    pub boiling_point: Option<f64>,
}

impl Material {
    pub fn name_in(&self, state: MatterState) -> &str {
        match state {
            MatterState::Solid => &self.solid_name,
            MatterState::Liquid => &self.liquid_name,
            MatterState::Gas => &self.gas_name,
        }
    }

    pub fn state_at(&self, temperature: f64) -> MatterState {
        MatterState::at(temperature, self.melting_point, self.boiling_point)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    /// Lowercase noun phrase; substances take the name of their current phase.
    pub name: String,
    pub article: String,
    pub kind: Kind,
    pub portable: bool,
    pub openable: bool,
    /// `Some` exactly when `openable`.
    pub is_open: Option<bool>,
    pub receptacle: Option<Receptacle>,
    pub contents: Vec<EntityId>,
    pub temperature: f64,
    pub material: Option<Material>,
    pub matter_state: Option<MatterState>,
    pub alive: bool,
    pub lifespan: Option<f64>,
    pub switch: Option<SwitchStyle>,
    /// `Some` exactly when the device has a switch.
    pub activated: Option<bool>,
    pub heat_output: Option<f64>,
    pub temperature_limit: Option<f64>,
    pub broken: bool,
    pub measures_temperature: bool,
    pub text: Option<String>,
}

impl Entity {
    pub fn new(id: EntityId, name: impl Into<String>, kind: Kind) -> Self {
        Entity {
            id,
            name: name.into(),
            article: "a".to_string(),
            kind,
            portable: false,
            openable: false,
            is_open: None,
            receptacle: None,
            contents: Vec::new(),
            temperature: 10.0,
            material: None,
            matter_state: None,
            alive: false,
            lifespan: None,
            switch: None,
            activated: None,
            heat_output: None,
            temperature_limit: None,
            broken: false,
            measures_temperature: false,
            text: None,
        }
    }

    /// A substance entity whose name follows its phase.
    pub fn substance(id: EntityId, material: Material, temperature: f64) -> Self {
        let state = material.state_at(temperature);
        let mut entity = Entity::new(id, material.name_in(state), Kind::Substance);
        entity.temperature = temperature;
        entity.matter_state = Some(state);
        entity.material = Some(material);
        entity
    }

    pub fn melting_point(&self) -> Option<f64> {
        self.material.as_ref().and_then(|m| m.melting_point)
    }

    pub fn boiling_point(&self) -> Option<f64> {
        self.material.as_ref().and_then(|m| m.boiling_point)
    }

    /// Contents are visible and reachable: a receptacle that is not closed.
    pub fn is_accessible(&self) -> bool {
        self.receptacle.is_some() && self.is_open != Some(false)
    }

    /// Heating or cooling devices affect their contents when powered, not
    /// broken, and either switched on or switchless (a freezer).
    pub fn drives_temperature(&self) -> bool {
        self.heat_output.is_some() && !self.broken && self.activated != Some(false)
    }

    pub fn is_heater(&self) -> bool {
        self.heat_output.is_some_and(|h| h > 0.0)
    }

    pub fn is_cooler(&self) -> bool {
        self.heat_output.is_some_and(|h| h < 0.0)
    }

    /// Re-derives phase and phase name from the current temperature.
    pub fn refresh_phase(&mut self) {
        if let Some(material) = &self.material {
            let state = material.state_at(self.temperature);
            self.matter_state = Some(state);
            self.name = material.name_in(state).to_string();
        }
    }
}
