//! Slot keys and the fixed MultiWOZ-2.0 slot schema.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseSlotKeyError;

/// The seven tracked domains, in report order.
pub const DOMAINS: [&str; 7] = [
    "taxi",
    "restaurant",
    "bus",
    "hospital",
    "hotel",
    "attraction",
    "train",
];

/// All 37 tracked `(domain, slot)` pairs in canonical order.
///
/// Slot names keep the casing of the corpus annotations (`leaveAt`, `arriveBy`).
pub const MULTIWOZ_SLOTS: [(&str, &str); 37] = [
    ("taxi", "leaveAt"),
    ("taxi", "destination"),
    ("taxi", "departure"),
    ("taxi", "arriveBy"),
    ("restaurant", "people"),
    ("restaurant", "day"),
    ("restaurant", "time"),
    ("restaurant", "food"),
    ("restaurant", "pricerange"),
    ("restaurant", "name"),
    ("restaurant", "area"),
    ("bus", "people"),
    ("bus", "leaveAt"),
    ("bus", "destination"),
    ("bus", "day"),
    ("bus", "arriveBy"),
    ("bus", "departure"),
    ("hospital", "department"),
    ("hotel", "people"),
    ("hotel", "day"),
    ("hotel", "stay"),
    ("hotel", "name"),
    ("hotel", "area"),
    ("hotel", "parking"),
    ("hotel", "pricerange"),
    ("hotel", "stars"),
    ("hotel", "internet"),
    ("hotel", "type"),
    ("attraction", "type"),
    ("attraction", "name"),
    ("attraction", "area"),
    ("train", "people"),
    ("train", "leaveAt"),
    ("train", "destination"),
    ("train", "day"),
    ("train", "arriveBy"),
    ("train", "departure"),
];

/// Number of tracked slots.
pub const NUM_SLOTS: usize = MULTIWOZ_SLOTS.len();

/// A `domain.slot` key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SlotKey {
    pub domain: String,
    pub slot: String,
}

impl SlotKey {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>) -> Self {
        Self {
            domain: domain.into(),
            slot: slot.into(),
        }
    }

    /// Position of this key in [`MULTIWOZ_SLOTS`], if it is a tracked slot.
    pub fn index(&self) -> Option<usize> {
        slot_index(&self.domain, &self.slot)
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain, self.slot)
    }
}

impl FromStr for SlotKey {
    type Err = ParseSlotKeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((domain, slot))
                if !domain.is_empty() && !slot.is_empty() && !slot.contains('.') =>
            {
                Ok(SlotKey::new(domain, slot))
            }
            _ => Err(ParseSlotKeyError(s.to_string())),
        }
    }
}

impl Serialize for SlotKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All 37 keys in canonical order.
pub fn slot_keys() -> Vec<SlotKey> {
    MULTIWOZ_SLOTS
        .iter()
        .map(|(d, s)| SlotKey::new(*d, *s))
        .collect()
}

pub fn slot_index(domain: &str, slot: &str) -> Option<usize> {
    MULTIWOZ_SLOTS
        .iter()
        .position(|(d, s)| *d == domain && *s == slot)
}

/// Index of a rendered `domain.slot` key.
pub fn slot_index_of(rendered: &str) -> Option<usize> {
    let (d, s) = rendered.split_once('.')?;
    slot_index(d, s)
}

pub fn slot_name(index: usize) -> String {
    let (d, s) = MULTIWOZ_SLOTS[index];
    format!("{d}.{s}")
}

/// Slot indices belonging to `domain`.
pub fn domain_slots(domain: &str) -> Vec<usize> {
    MULTIWOZ_SLOTS
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| *d == domain)
        .map(|(i, _)| i)
        .collect()
}
