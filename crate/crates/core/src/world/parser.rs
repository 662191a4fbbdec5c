//! Closed command grammar and noun-phrase resolution.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::entity::{DoorId, EntityId, RoomId};
use super::state::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    LookAround,
    Inventory,
    Wait,
    LookAt,
    LookIn,
    Open,
    Close,
    GoTo,
    PickUp,
    PutIn,
    FocusOn,
    Activate,
    Deactivate,
    UseOn,
    PourInto,
    Mix,
    Read,
}

impl Verb {
    pub const ALL: [Verb; 17] = [
        Verb::LookAround,
        Verb::Inventory,
        Verb::Wait,
        Verb::LookAt,
        Verb::LookIn,
        Verb::Open,
        Verb::Close,
        Verb::GoTo,
        Verb::PickUp,
        Verb::PutIn,
        Verb::FocusOn,
        Verb::Activate,
        Verb::Deactivate,
        Verb::UseOn,
        Verb::PourInto,
        Verb::Mix,
        Verb::Read,
    ];

    pub fn arity(self) -> usize {
        match self {
            Verb::LookAround | Verb::Inventory | Verb::Wait => 0,
            Verb::PutIn | Verb::UseOn | Verb::PourInto => 2,
            _ => 1,
        }
    }
}

/// What a noun phrase resolved to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Target {
    Entity(EntityId),
    Door(DoorId),
    Room(RoomId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub verb: Verb,
    pub args: Vec<Target>,
}

impl Action {
    pub fn new(verb: Verb, args: Vec<Target>) -> Self {
        debug_assert_eq!(verb.arity(), args.len());
        Action { verb, args }
    }

    pub fn bare(verb: Verb) -> Self {
        Action::new(verb, Vec::new())
    }

    pub fn entity(&self, i: usize) -> Option<EntityId> {
        match self.args.get(i) {
            Some(Target::Entity(id)) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseResult {
    Parsed(Action),
    SyntaxError,
    UnresolvedObject(String),
    /// The phrase names several different visible things.
    Ambiguous(String),
}

impl ParseResult {
    pub fn action(&self) -> Option<&Action> {
        match self {
            ParseResult::Parsed(action) => Some(action),
            _ => None,
        }
    }
}

/// Separators accepted between the two objects of a two-argument verb.
fn separators(verb: Verb) -> &'static [&'static str] {
    match verb {
        Verb::PutIn => &[" in ", " into ", " on "],
        Verb::UseOn => &[" on "],
        Verb::PourInto => &[" into ", " in "],
        _ => &[],
    }
}

const PREFIXES: [(&str, Verb); 14] = [
    ("look at ", Verb::LookAt),
    ("look in ", Verb::LookIn),
    ("open ", Verb::Open),
    ("close ", Verb::Close),
    ("go to ", Verb::GoTo),
    ("pick up ", Verb::PickUp),
    ("put ", Verb::PutIn),
    ("focus on ", Verb::FocusOn),
    ("activate ", Verb::Activate),
    ("deactivate ", Verb::Deactivate),
    ("use ", Verb::UseOn),
    ("pour ", Verb::PourInto),
    ("mix ", Verb::Mix),
    ("read ", Verb::Read),
];

fn normalize(raw: &str) -> String {
    let lowered = raw.trim().trim_end_matches(['.', '!']).to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn parse_action(raw: &str, state: &WorldState) -> ParseResult {
    let text = normalize(raw);
    match text.as_str() {
        "look around" | "look" => return ParseResult::Parsed(Action::bare(Verb::LookAround)),
        "inventory" => return ParseResult::Parsed(Action::bare(Verb::Inventory)),
        "wait" => return ParseResult::Parsed(Action::bare(Verb::Wait)),
        _ => {}
    }
    let Some((verb, rest)) = PREFIXES
        .iter()
        .find_map(|(prefix, verb)| text.strip_prefix(prefix).map(|rest| (*verb, rest)))
    else {
        return ParseResult::SyntaxError;
    };
    if verb.arity() == 1 {
        let scope = if verb == Verb::GoTo {
            Scope::Travel
        } else {
            Scope::Local
        };
        return match resolve(state, rest, scope) {
            Resolution::Found(target) => ParseResult::Parsed(Action::new(verb, vec![target])),
            Resolution::Empty => ParseResult::SyntaxError,
            Resolution::Unresolved => ParseResult::UnresolvedObject(rest.to_string()),
            Resolution::Ambiguous => ParseResult::Ambiguous(rest.to_string()),
        };
    }
    parse_pair(state, verb, rest)
}

/// Tries every split of `rest` at an accepted separator. The first split
/// where both phrases resolve wins; otherwise the most informative failure
/// (first phrase resolved, rightmost split) is reported.
fn parse_pair(state: &WorldState, verb: Verb, rest: &str) -> ParseResult {
    let mut splits = Vec::new();
    for sep in separators(verb) {
        let mut from = 0;
        while let Some(pos) = rest[from..].find(sep) {
            let at = from + pos;
            splits.push((at, &rest[..at], &rest[at + sep.len()..]));
            from = at + 1;
        }
    }
    if splits.is_empty() {
        return ParseResult::SyntaxError;
    }
    splits.sort_by_key(|(at, _, _)| *at);
    let mut best: Option<(bool, ParseResult)> = None;
    for (_, first, second) in splits {
        let a = resolve(state, first, Scope::Local);
        let b = resolve(state, second, Scope::Local);
        let failure = match (&a, &b) {
            (Resolution::Found(x), Resolution::Found(y)) => {
                return ParseResult::Parsed(Action::new(verb, vec![*x, *y]));
            }
            (Resolution::Empty, _) | (_, Resolution::Empty) => ParseResult::SyntaxError,
            (Resolution::Found(_), failed) => failed.failure(second),
            (failed, _) => failed.failure(first),
        };
        let first_ok = matches!(a, Resolution::Found(_));
        if best.as_ref().is_none_or(|(ok, _)| first_ok || !ok) {
            best = Some((first_ok, failure));
        }
    }
    best.map(|(_, r)| r).unwrap_or(ParseResult::SyntaxError)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    /// Visible entities and the doors of the agent's room.
    Local,
    /// Adjacent rooms plus visible entities ("go to").
    Travel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Resolution {
    Found(Target),
    Empty,
    Unresolved,
    Ambiguous,
}

impl Resolution {
    fn failure(&self, phrase: &str) -> ParseResult {
        match self {
            Resolution::Ambiguous => ParseResult::Ambiguous(phrase.trim().to_string()),
            Resolution::Empty => ParseResult::SyntaxError,
            _ => ParseResult::UnresolvedObject(phrase.trim().to_string()),
        }
    }
}

struct Candidate {
    target: Target,
    name: String,
    /// Tie-break rank: inventory 0, room 1.
    rank: u8,
}

fn candidates(state: &WorldState, scope: Scope, carried_only: bool) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = state
        .visible_entities()
        .into_iter()
        .filter(|&(_, carried)| carried || !carried_only)
        .map(|(id, carried)| Candidate {
            target: Target::Entity(id),
            name: state.entity(id).name.clone(),
            rank: if carried { 0 } else { 1 },
        })
        .collect();
    if carried_only {
        return out;
    }
    let here = state.agent_room;
    for (room, door) in state.neighbors(here) {
        let (target, name) = match scope {
            Scope::Local => (
                Target::Door(door),
                format!("door to {}", state.room(room).name),
            ),
            Scope::Travel => (Target::Room(room), state.room(room).name.clone()),
        };
        out.push(Candidate {
            target,
            name,
            rank: 1,
        });
    }
    out
}

fn strip_articles(mut phrase: &str) -> &str {
    loop {
        let before = phrase;
        for article in ["the ", "a ", "an "] {
            phrase = phrase.strip_prefix(article).unwrap_or(phrase);
        }
        if phrase == before {
            return phrase.trim();
        }
    }
}

fn contains_words(name: &[&str], phrase: &[&str]) -> bool {
    !phrase.is_empty() && name.windows(phrase.len()).any(|w| w == phrase)
}

fn resolve(state: &WorldState, phrase: &str, scope: Scope) -> Resolution {
    let mut phrase = strip_articles(phrase.trim());
    let mut carried_only = false;
    if let Some(stripped) = phrase.strip_suffix(" in inventory") {
        phrase = strip_articles(stripped);
        carried_only = true;
    }
    if phrase.is_empty() {
        return Resolution::Empty;
    }
    let words: Vec<&str> = phrase.split(' ').collect();
    let pool = candidates(state, scope, carried_only);
    let best = |matches: Vec<&Candidate>| {
        matches
            .into_iter()
            .min_by_key(|c| (c.rank, c.target))
            .map(|c| Resolution::Found(c.target))
            .unwrap_or(Resolution::Unresolved)
    };
    let exact: Vec<&Candidate> = pool.iter().filter(|c| c.name == phrase).collect();
    if !exact.is_empty() {
        return best(exact);
    }
    let partial: Vec<&Candidate> = pool
        .iter()
        .filter(|c| contains_words(&c.name.split(' ').collect::<Vec<_>>(), &words))
        .collect();
    let mut names: Vec<&str> = partial.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    if names.len() > 1 {
        return Resolution::Ambiguous;
    }
    best(partial)
}

pub fn target_name(state: &WorldState, target: Target) -> String {
    match target {
        Target::Entity(id) => state.entity(id).name.clone(),
        Target::Door(door) => format!(
            "door to {}",
            state
                .room(state.door(door).other_side(state.agent_room))
                .name
        ),
        Target::Room(room) => state.room(room).name.clone(),
    }
}

/// Canonical command text for `action`. Entities that are carried get the
/// inventory qualifier when `qualify` is set.
pub fn action_text(state: &WorldState, action: &Action, qualify: [bool; 2]) -> String {
    let name = |i: usize| {
        let mut n = target_name(state, action.args[i]);
        if qualify[i] {
            n.push_str(" in inventory");
        }
        n
    };
    match action.verb {
        Verb::LookAround => "look around".into(),
        Verb::Inventory => "inventory".into(),
        Verb::Wait => "wait".into(),
        Verb::LookAt => format!("look at {}", name(0)),
        Verb::LookIn => format!("look in {}", name(0)),
        Verb::Open => format!("open {}", name(0)),
        Verb::Close => format!("close {}", name(0)),
        Verb::GoTo => format!("go to {}", name(0)),
        Verb::PickUp => format!("pick up {}", name(0)),
        Verb::PutIn => {
            let on = action
                .entity(1)
                .is_some_and(|h| state.entity(h).receptacle == Some(super::entity::Receptacle::On));
            format!(
                "put {} {} {}",
                name(0),
                if on { "on" } else { "in" },
                name(1)
            )
        }
        Verb::FocusOn => format!("focus on {}", name(0)),
        Verb::Activate => format!("activate {}", name(0)),
        Verb::Deactivate => format!("deactivate {}", name(0)),
        Verb::UseOn => format!("use {} on {}", name(0), name(1)),
        Verb::PourInto => format!("pour {} into {}", name(0), name(1)),
        Verb::Mix => format!("mix {}", name(0)),
        Verb::Read => format!("read {}", name(0)),
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            Verb::LookAround => "look around",
            Verb::Inventory => "inventory",
            Verb::Wait => "wait",
            Verb::LookAt => "look at",
            Verb::LookIn => "look in",
            Verb::Open => "open",
            Verb::Close => "close",
            Verb::GoTo => "go to",
            Verb::PickUp => "pick up",
            Verb::PutIn => "put",
            Verb::FocusOn => "focus on",
            Verb::Activate => "activate",
            Verb::Deactivate => "deactivate",
            Verb::UseOn => "use",
            Verb::PourInto => "pour",
            Verb::Mix => "mix",
            Verb::Read => "read",
        };
        f.write_str(text)
    }
}
