//! Enumeration of every action that would execute or be redundant.

use std::collections::HashMap;

use super::parser::{action_text, parse_action, Action, ParseResult, Target, Verb};
use super::state::WorldState;
use super::step::{outcome_of, StepOutcome};

/// A valid action together with the command text that parses back to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidAction {
    pub action: Action,
    pub text: String,
}

const UNARY: [Verb; 10] = [
    Verb::LookAt,
    Verb::LookIn,
    Verb::Open,
    Verb::Close,
    Verb::PickUp,
    Verb::FocusOn,
    Verb::Activate,
    Verb::Deactivate,
    Verb::Mix,
    Verb::Read,
];

/// All grammar instances over visible objects whose step outcome would not be
/// an affordance violation, in a fixed order. Actions whose canonical text
/// cannot address them (a second, identically named object) are left out.
pub fn valid_actions(state: &WorldState) -> Vec<ValidAction> {
    let visible = state.visible_entities();
    let entities: Vec<Target> = visible.iter().map(|&(id, _)| Target::Entity(id)).collect();
    let doors: Vec<Target> = state
        .room(state.agent_room)
        .doors
        .iter()
        .map(|&d| Target::Door(d))
        .collect();
    let carried = |t: Target| match t {
        Target::Entity(id) => visible.iter().any(|&(v, c)| v == id && c),
        _ => false,
    };

    let mut proposals: Vec<Action> = [Verb::LookAround, Verb::Inventory, Verb::Wait]
        .into_iter()
        .map(Action::bare)
        .collect();
    for verb in UNARY {
        for &t in entities.iter().chain(&doors) {
            proposals.push(Action::new(verb, vec![t]));
        }
    }
    for (room, _) in state.neighbors(state.agent_room) {
        proposals.push(Action::new(Verb::GoTo, vec![Target::Room(room)]));
    }
    for verb in [Verb::PutIn, Verb::UseOn, Verb::PourInto] {
        for &a in &entities {
            for &b in &entities {
                if a != b {
                    proposals.push(Action::new(verb, vec![a, b]));
                }
            }
        }
    }

    let mut resolved: HashMap<String, ParseResult> = HashMap::new();
    let mut out = Vec::new();
    for action in proposals {
        if outcome_of(state, &action) == StepOutcome::AffordanceViolation {
            continue;
        }
        let mut options = vec![[false, false]];
        let q = [
            action.args.first().is_some_and(|&t| carried(t)),
            action.args.get(1).is_some_and(|&t| carried(t)),
        ];
        if q != [false, false] {
            options.push(q);
        }
        for qualify in options {
            let text = action_text(state, &action, qualify);
            let parsed = resolved
                .entry(text.clone())
                .or_insert_with(|| parse_action(&text, state));
            if parsed.action() == Some(&action) {
                out.push(ValidAction { action, text });
                break;
            }
        }
    }
    out
}
