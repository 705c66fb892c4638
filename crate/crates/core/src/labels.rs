//! Speaker and identity labels shared across stages.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotation::CharacterId;

pub const UNKNOWN: &str = "UNKNOWN";
pub const OTHERS: &str = "OTHERS";

/// A predicted speaker: a roster character or unknown.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Speaker {
    Known(CharacterId),
    Unknown,
}

impl Speaker {
    pub fn character(&self) -> Option<&str> {
        match self {
            Speaker::Known(c) => Some(c),
            Speaker::Unknown => None,
        }
    }

    pub fn is(&self, character: &str) -> bool {
        self.character() == Some(character)
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.character().unwrap_or(UNKNOWN))
    }
}

impl Serialize for Speaker {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Speaker {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == UNKNOWN { Speaker::Unknown } else { Speaker::Known(s) })
    }
}

/// Output of (k+1)-way character identification.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Identity {
    Character(CharacterId),
    Others,
}

impl Identity {
    pub fn as_speaker(&self) -> Speaker {
        match self {
            Identity::Character(c) => Speaker::Known(c.clone()),
            Identity::Others => Speaker::Unknown,
        }
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identity::Character(c) => f.write_str(c),
            Identity::Others => f.write_str(OTHERS),
        }
    }
}

impl Serialize for Identity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Identity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == OTHERS { Identity::Others } else { Identity::Character(s) })
    }
}

/// Which method produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RuleShort,
    RuleFrame,
    Llm,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::RuleShort => "rule_short",
            Method::RuleFrame => "rule_frame",
            Method::Llm => "llm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}
