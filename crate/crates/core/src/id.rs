//! Wikidata entity identifiers (`Q42`, `P17`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Item,
    Property,
}

impl EntityKind {
    fn prefix(self) -> char {
        match self {
            EntityKind::Item => 'Q',
            EntityKind::Property => 'P',
        }
    }
}

/// An item or property identifier. The number is always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    kind: EntityKind,
    number: u64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdError {
    #[error("invalid entity id {0:?}")]
    Invalid(String),
    #[error("entity number must be positive in {0:?}")]
    Zero(String),
}

impl EntityId {
    pub fn new(kind: EntityKind, number: u64) -> Option<Self> {
        (number >= 1).then_some(Self { kind, number })
    }

    /// Item id, panicking on zero. Meant for literals in code and tests.
    pub fn item(number: u64) -> Self {
        Self::new(EntityKind::Item, number).expect("item number must be positive")
    }

    pub fn property(number: u64) -> Self {
        Self::new(EntityKind::Property, number).expect("property number must be positive")
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn number(&self) -> u64 {
        self.number
    }

    pub fn is_item(&self) -> bool {
        self.kind == EntityKind::Item
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.number)
    }
}

impl FromStr for EntityId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('Q') => EntityKind::Item,
            Some('P') => EntityKind::Property,
            _ => return Err(IdError::Invalid(s.to_owned())),
        };
        let digits = chars.as_str();
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(IdError::Invalid(s.to_owned()));
        }
        let number: u64 = digits.parse().map_err(|_| IdError::Invalid(s.to_owned()))?;
        EntityId::new(kind, number).ok_or_else(|| IdError::Zero(s.to_owned()))
    }
}

impl Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parse a comma-separated id list such as `P17,P27,P495`. Empty input gives an empty list.
pub fn parse_id_list(s: &str) -> Result<Vec<EntityId>, IdError> {
    s.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(str::parse)
        .collect()
}

pub fn render_id_list<'a>(ids: impl IntoIterator<Item = &'a EntityId>) -> String {
    ids.into_iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
