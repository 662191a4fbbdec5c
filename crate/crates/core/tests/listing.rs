//! Replays the published example transcript against the built-in world.

use textlab_core::eval::execute;
use textlab_core::world::{render_look, EntitySpec, Kind, Location, Receptacle, WorldSpec};

const HALLWAY: &str = "This room is called the hallway. In it, you see: the agent; a substance called air; a picture. You also see: A door to the art studio (that is closed); A door to the bedroom (that is closed); A door to the greenhouse (that is closed); A door to the kitchen (that is closed); A door to the living room (that is closed); A door to the workshop (that is closed)";

const KITCHEN_HEAD: &str = "This room is called the kitchen. In it, you see: the agent; a substance called air; a blue box (containing nothing); a chair. On the chair is: nothing.; a counter. On the counter is: a bowl (containing a red apple, a banana, an orange, a potato), a drawer.; a cupboard. The cupboard door is closed. ; a freezer. The freezer door is closed. ; a fridge. The fridge door is closed. ; a glass jar (containing a substance called sodium chloride); a lighter; a orange box (containing nothing); a oven, which is turned off. The oven door is closed. ; a painting; a sink, which is turned off. In the sink is: nothing.; a substance called soap; a stopwatch, which is deactivated. ; a stove, which is turned off. On the stove is: nothing.; a table. On the table is: a glass cup (containing nothing).";

const KITCHEN_DOORS: &str = " You also see: A door to the bathroom (that is closed); A door to the hallway (that is open); A door to the outside (that is closed)";

fn answer_box(name: &str) -> EntitySpec {
    EntitySpec {
        name: Some(name.into()),
        kind: Some(Kind::Container),
        receptacle: Some(Receptacle::Containing),
        ..Default::default()
    }
}

#[test]
fn published_transcript_replays_verbatim() {
    let spec = WorldSpec::builtin();
    let mut world = spec.build(0).unwrap();
    let kitchen = world.room_id("kitchen").unwrap();
    let orange = EntitySpec {
        name: Some("orange".into()),
        article: Some("an".into()),
        kind: Some(Kind::Item),
        portable: true,
        ..Default::default()
    };
    spec.spawn(&mut world, &orange, Location::Inventory)
        .unwrap();
    spec.spawn(&mut world, &answer_box("blue box"), Location::Room(kitchen))
        .unwrap();
    spec.spawn(
        &mut world,
        &answer_box("orange box"),
        Location::Room(kitchen),
    )
    .unwrap();

    assert_eq!(render_look(&world), HALLWAY);
    let kitchen_first = format!(
        "{KITCHEN_HEAD}; a thermometer, currently reading a temperature of 10 degrees celsius.{KITCHEN_DOORS}"
    );
    let kitchen_later = format!("{KITCHEN_HEAD}.{KITCHEN_DOORS}");
    let script: [(&str, &str); 10] = [
        ("look around", HALLWAY),
        ("inventory", "In your inventory, you see: an orange"),
        ("open door to kitchen", "The door is now open."),
        ("go to kitchen", "You move to the kitchen."),
        ("look around", &kitchen_first),
        (
            "pick up thermometer",
            "You move the thermometer to the inventory.",
        ),
        (
            "focus on thermometer in inventory",
            "You focus on the thermometer.",
        ),
        ("look around", &kitchen_later),
        ("open freezer", "The freezer is now open."),
        ("look in freezer", "Inside the freezer is: nothing"),
    ];
    for (action, expected) in script {
        let (_, observation) = execute(&mut world, action);
        assert_eq!(observation, expected, "after {action:?}");
    }
}
