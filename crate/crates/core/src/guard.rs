//! Text-level preconditions guard. It reads observations to learn which
//! doors and closeable containers are open, and swallows open/close actions
//! that would not change anything, answering as the game would.
//!
//! The guard never looks at the world state. Everything it knows comes from
//! observation sentences and the actions that produced them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::world::messages::{fill, messages};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenState {
    Open,
    Closed,
}

/// Ledger key. Doors are keyed by the unordered pair of rooms they join, so
/// evidence from either side applies to both.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Openable {
    Door { rooms: (String, String) },
    Object { room: String, name: String },
}

impl Openable {
    fn door(a: &str, b: &str) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        Openable::Door {
            rooms: (a.to_string(), b.to_string()),
        }
    }

    fn in_room(&self, room: &str) -> bool {
        match self {
            Openable::Door { rooms } => rooms.0 == room || rooms.1 == room,
            Openable::Object { room: r, .. } => r == room,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub state: OpenState,
    /// Guard tick of the last evidence.
    pub updated: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interception {
    pub action: String,
    pub reply: String,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    PassThrough,
    Intercept(String),
}

/// Open/closed knowledge for one episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpenStateLedger {
    entries: BTreeMap<Openable, LedgerEntry>,
    room: Option<String>,
    tick: u64,
    /// Drop a room's entries when the agent leaves it.
    pub clear_on_leave: bool,
    interceptions: Vec<Interception>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Request {
    Open(String),
    Close(String),
}

fn normalize(text: &str) -> String {
    let lowered = text.trim().to_lowercase();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    if let Some(last) = words.last_mut() {
        *last = last.trim_end_matches(['.', '!']);
    }
    words.retain(|w| !w.is_empty());
    words.join(" ")
}

fn strip_article(phrase: &str) -> &str {
    for article in ["the ", "a ", "an "] {
        if let Some(rest) = phrase.strip_prefix(article) {
            return rest;
        }
    }
    phrase
}

fn parse_request(action: &str) -> Option<Request> {
    let action = normalize(action);
    if let Some(rest) = action.strip_prefix("open ") {
        Some(Request::Open(strip_article(rest).to_string()))
    } else {
        action
            .strip_prefix("close ")
            .map(|rest| Request::Close(strip_article(rest).to_string()))
    }
}

/// Text between `prefix` and the next occurrence of `suffix`, for every
/// occurrence of `prefix` in `text`.
fn captures<'t>(text: &'t str, prefix: &str, suffix: &str) -> Vec<&'t str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(prefix) {
        let after = &rest[start + prefix.len()..];
        match after.find(suffix) {
            Some(end) => {
                out.push(&after[..end]);
                rest = &after[end + suffix.len()..];
            }
            None => break,
        }
    }
    out
}

fn state_word(word: &str) -> Option<OpenState> {
    match word {
        "open" => Some(OpenState::Open),
        "closed" => Some(OpenState::Closed),
        _ => None,
    }
}

impl OpenStateLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_clear_on_leave(mut self, clear: bool) -> Self {
        self.clear_on_leave = clear;
        self
    }

    pub fn room(&self) -> Option<&str> {
        self.room.as_deref()
    }

    pub fn entries(&self) -> &BTreeMap<Openable, LedgerEntry> {
        &self.entries
    }

    pub fn interceptions(&self) -> &[Interception] {
        &self.interceptions
    }

    pub fn door_state(&self, a: &str, b: &str) -> Option<OpenState> {
        self.entries.get(&Openable::door(a, b)).map(|e| e.state)
    }

    pub fn object_state(&self, room: &str, name: &str) -> Option<OpenState> {
        self.entries
            .get(&Openable::Object {
                room: room.to_string(),
                name: name.to_string(),
            })
            .map(|e| e.state)
    }

    fn record(&mut self, key: Openable, state: OpenState) {
        self.entries.insert(
            key,
            LedgerEntry {
                state,
                updated: self.tick,
            },
        );
    }

    fn enter(&mut self, room: &str) {
        if self.room.as_deref() == Some(room) {
            return;
        }
        if self.clear_on_leave {
            if let Some(old) = self.room.take() {
                self.entries.retain(|k, _| !k.in_room(&old));
            }
        }
        self.room = Some(room.to_string());
    }

    fn target_key(&self, phrase: &str) -> Option<Openable> {
        let room = self.room.as_deref()?;
        Some(match phrase.strip_prefix("door to ") {
            Some(dest) => Openable::door(room, strip_article(dest)),
            None => Openable::Object {
                room: room.to_string(),
                name: phrase.to_string(),
            },
        })
    }

    /// Updates the ledger from one observation. `action` is the command that
    /// produced it, if any; replies that do not name their object ("The door
    /// is now open.") are attributed through it.
    pub fn observe(&mut self, action: Option<&str>, observation: &str) {
        self.tick += 1;
        for room in captures(observation, "You move to the ", ".") {
            self.enter(room);
        }
        for room in captures(observation, "This room is called the ", ".") {
            self.enter(room);
        }
        let Some(here) = self.room.clone() else {
            return;
        };

        for inner in captures(observation, "A door to the ", ")") {
            if let Some((dest, state)) = inner.split_once(" (that is ") {
                if let Some(state) = state_word(state) {
                    self.record(Openable::door(&here, dest), state);
                }
            }
        }
        for dest in captures(observation, "The door to the ", " is closed.") {
            self.record(Openable::door(&here, dest), OpenState::Closed);
        }
        for sentence in observation.split(". ").map(|s| s.trim_start_matches("; ")) {
            let sentence = sentence.trim_end_matches('.');
            let Some(rest) = sentence.strip_prefix("The ") else {
                continue;
            };
            if let Some((name, word)) = rest.rsplit_once(" door is ") {
                if let Some(state) = state_word(word) {
                    self.record(
                        Openable::Object {
                            room: here.clone(),
                            name: name.to_string(),
                        },
                        state,
                    );
                }
            }
        }

        let m = messages();
        let request = action.and_then(parse_request);
        let attributed = match &request {
            Some(Request::Open(phrase)) => {
                let direct = [
                    fill(&m.now_open, &[("name", phrase)]),
                    fill(&m.already_open, &[("name", phrase)]),
                ];
                let door = [m.door_now_open.clone(), m.door_already_open.clone()];
                Some((phrase, OpenState::Open, direct, door))
            }
            Some(Request::Close(phrase)) => {
                let direct = [
                    fill(&m.now_closed, &[("name", phrase)]),
                    fill(&m.already_closed, &[("name", phrase)]),
                ];
                let door = [m.door_now_closed.clone(), m.door_already_closed.clone()];
                Some((phrase, OpenState::Closed, direct, door))
            }
            None => None,
        };
        if let Some((phrase, state, direct, door)) = attributed {
            let observation = observation.trim();
            let is_door = phrase.starts_with("door to ");
            let matched = if is_door {
                door.iter().any(|d| d == observation)
            } else {
                direct.iter().any(|d| d == observation)
            };
            if matched {
                if let Some(key) = self.target_key(phrase) {
                    self.record(key, state);
                }
            }
        }
    }

    /// Decides whether `action` may reach the game.
    pub fn filter(&self, action: &str) -> Decision {
        let Some(request) = parse_request(action) else {
            return Decision::PassThrough;
        };
        let (phrase, wanted) = match &request {
            Request::Open(p) => (p, OpenState::Open),
            Request::Close(p) => (p, OpenState::Closed),
        };
        let Some(key) = self.target_key(phrase) else {
            return Decision::PassThrough;
        };
        match self.entries.get(&key) {
            Some(entry) if entry.state == wanted => {
                let m = messages();
                let reply = match (&key, wanted) {
                    (Openable::Door { .. }, OpenState::Open) => m.door_now_open.clone(),
                    (Openable::Door { .. }, OpenState::Closed) => m.door_now_closed.clone(),
                    (Openable::Object { name, .. }, OpenState::Open) => {
                        fill(&m.now_open, &[("name", name)])
                    }
                    (Openable::Object { name, .. }, OpenState::Closed) => {
                        fill(&m.now_closed, &[("name", name)])
                    }
                };
                Decision::Intercept(reply)
            }
            _ => Decision::PassThrough,
        }
    }

    /// `filter` plus bookkeeping of the interception.
    pub fn intercept(&mut self, action: &str) -> Decision {
        let decision = self.filter(action);
        if let Decision::Intercept(reply) = &decision {
            self.interceptions.push(Interception {
                action: action.to_string(),
                reply: reply.clone(),
                tick: self.tick,
            });
        }
        decision
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_hallway() -> OpenStateLedger {
        let mut ledger = OpenStateLedger::new();
        ledger.observe(
            Some("look around"),
            "This room is called the hallway. In it, you see: the agent; a substance called air; a picture. \
             You also see: A door to the kitchen (that is closed); A door to the workshop (that is open)",
        );
        ledger
    }

    #[test]
    fn door_listing_is_evidence() {
        let ledger = in_hallway();
        assert_eq!(ledger.room(), Some("hallway"));
        assert_eq!(
            ledger.door_state("hallway", "kitchen"),
            Some(OpenState::Closed)
        );
        assert_eq!(
            ledger.door_state("workshop", "hallway"),
            Some(OpenState::Open)
        );
    }

    #[test]
    fn open_reply_updates_the_door() {
        let mut ledger = in_hallway();
        assert_eq!(ledger.filter("open door to kitchen"), Decision::PassThrough);
        ledger.observe(Some("open door to kitchen"), "The door is now open.");
        assert_eq!(
            ledger.door_state("kitchen", "hallway"),
            Some(OpenState::Open)
        );
        assert_eq!(
            ledger.filter("open door to kitchen"),
            Decision::Intercept("The door is now open.".into())
        );
        assert_eq!(
            ledger.filter("close door to kitchen"),
            Decision::PassThrough
        );
    }

    #[test]
    fn unknown_state_and_other_verbs_pass() {
        let ledger = in_hallway();
        assert_eq!(ledger.filter("open door to bedroom"), Decision::PassThrough);
        assert_eq!(ledger.filter("go to kitchen"), Decision::PassThrough);
        assert_eq!(
            OpenStateLedger::new().filter("open door to kitchen"),
            Decision::PassThrough
        );
    }

    #[test]
    fn unrelated_text_leaves_ledger_alone() {
        let mut ledger = in_hallway();
        let before = ledger.entries().clone();
        ledger.observe(Some("wait"), "You wait for a moment.");
        ledger.observe(None, "The door is now open.");
        assert_eq!(ledger.entries(), &before);
    }

    #[test]
    fn doors_are_shared_across_rooms() {
        let mut ledger = in_hallway();
        ledger.observe(Some("open door to kitchen"), "The door is now open.");
        ledger.observe(Some("go to kitchen"), "You move to the kitchen.");
        assert_eq!(
            ledger.filter("open door to hallway"),
            Decision::Intercept("The door is now open.".into())
        );
        let mut clearing = in_hallway().with_clear_on_leave(true);
        clearing.observe(Some("go to workshop"), "You move to the workshop.");
        assert_eq!(
            clearing.filter("open door to hallway"),
            Decision::PassThrough
        );
    }

    #[test]
    fn containers_in_room_descriptions() {
        let mut ledger = OpenStateLedger::new();
        ledger.observe(
            Some("look around"),
            "This room is called the kitchen. In it, you see: the agent; a freezer. The freezer door is closed. ; \
             a oven, which is turned off. The oven door is open. ; a sink.",
        );
        assert_eq!(
            ledger.object_state("kitchen", "freezer"),
            Some(OpenState::Closed)
        );
        assert_eq!(
            ledger.filter("open the oven"),
            Decision::Intercept("The oven is now open.".into())
        );
        ledger.observe(Some("open freezer"), "The freezer is now open.");
        assert_eq!(
            ledger.filter("open freezer"),
            Decision::Intercept("The freezer is now open.".into())
        );
        ledger.observe(Some("go to hallway"), "The door to the hallway is closed.");
        assert_eq!(
            ledger.door_state("kitchen", "hallway"),
            Some(OpenState::Closed)
        );
    }
}
