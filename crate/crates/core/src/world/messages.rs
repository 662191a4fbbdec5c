//! Frozen catalog of observation strings.

use std::sync::OnceLock;

use serde::Deserialize;

const DEFAULT_MESSAGES: &str = include_str!("../../data/messages.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageCatalog {
    pub door_now_open: String,
    pub door_now_closed: String,
    pub door_already_open: String,
    pub door_already_closed: String,
    pub door_blocks_path: String,
    pub now_open: String,
    pub now_closed: String,
    pub already_open: String,
    pub already_closed: String,
    pub cannot_open: String,
    pub cannot_close: String,
    pub moved_to_room: String,
    pub cannot_go: String,
    pub picked_up: String,
    pub already_carried: String,
    pub cannot_pick_up: String,
    pub moved_into: String,
    pub already_inside: String,
    pub cannot_move: String,
    pub not_a_receptacle: String,
    pub holder_closed: String,
    pub inside_itself: String,
    pub focused: String,
    pub already_focused: String,
    pub cannot_focus: String,
    pub activated: String,
    pub deactivated: String,
    pub already_activated: String,
    pub already_deactivated: String,
    pub cannot_activate: String,
    pub cannot_deactivate: String,
    pub broken: String,
    pub measured: String,
    pub cannot_use: String,
    pub poured: String,
    pub poured_contents: String,
    pub nothing_to_pour: String,
    pub cannot_pour: String,
    pub cannot_pour_into: String,
    pub mixed: String,
    pub nothing_to_mix: String,
    pub cannot_mix: String,
    pub reads: String,
    pub nothing_written: String,
    pub look_inside: String,
    pub cannot_look_inside: String,
    pub waited: String,
    pub unknown_command: String,
    pub unknown_object: String,
    pub ambiguous_object: String,
    pub won: String,
    pub lost: String,
}

impl MessageCatalog {
    pub fn builtin() -> &'static MessageCatalog {
        static CATALOG: OnceLock<MessageCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            toml::from_str(DEFAULT_MESSAGES).expect("built-in message catalog is valid")
        })
    }
}

/// Substitutes `{key}` placeholders in `template`.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}

pub fn messages() -> &'static MessageCatalog {
    MessageCatalog::builtin()
}
