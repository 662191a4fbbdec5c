use std::fmt;

use serde::{Deserialize, Serialize};

/// Validity class of one emitted action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionCategory {
    Valid,
    /// Affordance violation: the verb does not apply to the object.
    #[serde(rename = "AV")]
    AffordanceViolation,
    /// Invalid object: the command names something that is not there.
    #[serde(rename = "IO")]
    InvalidObject,
    /// Invalid syntax: not a command of the game grammar.
    #[serde(rename = "IS")]
    InvalidSyntax,
    /// Redundant action: a no-op such as opening an open door.
    #[serde(rename = "RA")]
    Redundant,
    Other,
}

impl ActionCategory {
    pub const ALL: [ActionCategory; 6] = [
        ActionCategory::Valid,
        ActionCategory::AffordanceViolation,
        ActionCategory::InvalidObject,
        ActionCategory::InvalidSyntax,
        ActionCategory::Redundant,
        ActionCategory::Other,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ActionCategory::Valid => "Valid",
            ActionCategory::AffordanceViolation => "AV",
            ActionCategory::InvalidObject => "IO",
            ActionCategory::InvalidSyntax => "IS",
            ActionCategory::Redundant => "RA",
            ActionCategory::Other => "Other",
        }
    }
}

impl fmt::Display for ActionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}
