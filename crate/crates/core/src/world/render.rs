//! Text observations. Room listings sort entities by name (ties by id) and
//! doors by destination; nested contents keep insertion order.

use super::entity::{DoorId, EntityId, Kind, Receptacle, RoomId};
use super::state::WorldState;

pub fn format_temperature(t: f64) -> String {
    let t = if t == 0.0 { 0.0 } else { t };
    if t.fract() == 0.0 {
        format!("{t:.0}")
    } else {
        format!("{t:.1}")
    }
}

/// Short form used inside lists: "a glass cup (containing nothing)".
pub fn describe_brief(state: &WorldState, id: EntityId) -> String {
    let e = state.entity(id);
    if e.kind == Kind::Substance {
        return format!("a substance called {}", e.name);
    }
    let mut out = format!("{} {}", e.article, e.name);
    if e.receptacle == Some(Receptacle::Containing) && e.is_accessible() {
        out.push_str(" (containing ");
        out.push_str(&list_brief(state, &e.contents));
        out.push(')');
    }
    out
}

/// Room-level form: "a stove, which is turned off. On the stove is: nothing."
pub fn describe_full(state: &WorldState, id: EntityId) -> String {
    let e = state.entity(id);
    if e.kind == Kind::Substance || e.receptacle == Some(Receptacle::Containing) {
        return describe_brief(state, id);
    }
    let base = format!("{} {}", e.article, e.name);
    if e.measures_temperature {
        return format!(
            "{base}, currently reading a temperature of {} degrees celsius",
            format_temperature(e.temperature)
        );
    }
    let has_switch = e.switch.is_some();
    let shows_contents = e.is_accessible();
    if !has_switch && !e.openable && e.receptacle.is_none() {
        return base;
    }
    let mut out = base;
    match (e.switch, e.activated) {
        (Some(style), Some(on)) => {
            out.push_str(", which is ");
            out.push_str(style.describe(on));
            out.push_str(". ");
        }
        _ => out.push_str(". "),
    }
    if let Some(open) = e.is_open {
        out.push_str(&format!(
            "The {} door is {}. ",
            e.name,
            if open { "open" } else { "closed" }
        ));
    }
    if shows_contents {
        let preposition = match e.receptacle {
            Some(Receptacle::On) => "On",
            _ => "In",
        };
        out.push_str(&format!(
            "{preposition} the {} is: {}.",
            e.name,
            list_brief(state, &e.contents)
        ));
    }
    out
}

pub fn list_brief(state: &WorldState, ids: &[EntityId]) -> String {
    if ids.is_empty() {
        return "nothing".to_string();
    }
    ids.iter()
        .map(|&id| describe_brief(state, id))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn describe_door(state: &WorldState, door: DoorId, from: RoomId) -> String {
    let d = state.door(door);
    format!(
        "A door to the {} (that is {})",
        state.room(d.other_side(from)).name,
        if d.is_open { "open" } else { "closed" }
    )
}

/// The "look around" paragraph for the agent's room.
pub fn render_look(state: &WorldState) -> String {
    let room = state.room(state.agent_room);
    let mut entities = room.entities.clone();
    entities.sort_by(|&a, &b| {
        state
            .entity(a)
            .name
            .cmp(&state.entity(b).name)
            .then(a.cmp(&b))
    });
    let mut items = vec![
        "the agent".to_string(),
        "a substance called air".to_string(),
    ];
    items.extend(entities.iter().map(|&id| describe_full(state, id)));
    let mut out = format!(
        "This room is called the {}. In it, you see: {}.",
        room.name,
        items.join("; ")
    );
    if !room.doors.is_empty() {
        let mut doors = room.doors.clone();
        doors.sort_by_key(|&d| state.room(state.door(d).other_side(room.id)).name.clone());
        let doors: Vec<String> = doors
            .iter()
            .map(|&d| describe_door(state, d, room.id))
            .collect();
        out.push_str(" You also see: ");
        out.push_str(&doors.join("; "));
    }
    out
}

pub fn render_inventory(state: &WorldState) -> String {
    format!(
        "In your inventory, you see: {}",
        list_brief(state, &state.inventory)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::layout::WorldSpec;
    use crate::world::state::Location;

    #[test]
    fn temperatures_render_without_spurious_decimals() {
        assert_eq!(format_temperature(10.0), "10");
        assert_eq!(format_temperature(-0.0), "0");
        assert_eq!(format_temperature(-10.0), "-10");
        assert_eq!(format_temperature(2.5), "2.5");
    }

    #[test]
    fn hallway_with_single_closed_door() {
        let mut state = WorldState::new(0);
        let hallway = state.add_room("hallway");
        let kitchen = state.add_room("kitchen");
        state.add_door(hallway, kitchen, false);
        let spec = WorldSpec::builtin();
        let picture = crate::world::layout::EntitySpec {
            name: Some("picture".into()),
            kind: Some(Kind::Item),
            ..Default::default()
        };
        spec.spawn(&mut state, &picture, Location::Room(hallway))
            .unwrap();
        state.agent_room = hallway;
        assert_eq!(
            render_look(&state),
            "This room is called the hallway. In it, you see: the agent; a substance called air; a picture. \
             You also see: A door to the kitchen (that is closed)"
        );
        assert_eq!(render_look(&state), render_look(&state));
        assert_eq!(
            render_inventory(&state),
            "In your inventory, you see: nothing"
        );
    }

    #[test]
    fn builtin_hallway_lists_doors_alphabetically() {
        let state = WorldSpec::builtin().build(0).unwrap();
        assert_eq!(
            render_look(&state),
            "This room is called the hallway. In it, you see: the agent; a substance called air; a picture. \
             You also see: A door to the art studio (that is closed); A door to the bedroom (that is closed); \
             A door to the greenhouse (that is closed); A door to the kitchen (that is closed); \
             A door to the living room (that is closed); A door to the workshop (that is closed)"
        );
    }

    #[test]
    fn kitchen_uses_transcript_surface_forms() {
        let mut state = WorldSpec::builtin().build(0).unwrap();
        state.agent_room = state.room_id("kitchen").unwrap();
        let text = render_look(&state);
        for fragment in [
            "This room is called the kitchen. In it, you see: the agent; a substance called air; a chair. On the chair is: nothing.; ",
            "a counter. On the counter is: a bowl (containing a red apple, a banana, an orange, a potato), a drawer.; ",
            "a cupboard. The cupboard door is closed. ; a freezer. The freezer door is closed. ; a fridge. The fridge door is closed. ; ",
            "a glass jar (containing a substance called sodium chloride); a lighter; ",
            "a oven, which is turned off. The oven door is closed. ; a painting; a sink, which is turned off. In the sink is: nothing.; ",
            "a substance called soap; a stopwatch, which is deactivated. ; a stove, which is turned off. On the stove is: nothing.; ",
            "a table. On the table is: a glass cup (containing nothing).; a thermometer, currently reading a temperature of 10 degrees celsius. ",
            "You also see: A door to the bathroom (that is closed); A door to the hallway (that is closed); A door to the outside (that is closed)",
        ] {
            assert!(text.contains(fragment), "missing {fragment:?} in {text}");
        }
    }
}
