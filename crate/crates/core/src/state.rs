//! The tracked object: a total slot-to-value mapping.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::slots::{slot_index_of, slot_name, NUM_SLOTS};
use crate::text::{normalize_value, NONE_VALUE};

/// Value per tracked slot, indexed by position in
/// [`MULTIWOZ_SLOTS`](crate::slots::MULTIWOZ_SLOTS). Always total; unset
/// slots hold `"none"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DialogueState {
    values: Vec<String>,
}

impl Default for DialogueState {
    fn default() -> Self {
        Self::all_none()
    }
}

impl DialogueState {
    pub fn all_none() -> Self {
        Self {
            values: vec![NONE_VALUE.to_string(); NUM_SLOTS],
        }
    }

    pub fn get(&self, slot: usize) -> &str {
        &self.values[slot]
    }

    /// Sets a slot, normalizing the value.
    pub fn set(&mut self, slot: usize, value: &str) {
        self.values[slot] = normalize_value(value);
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn is_none(&self, slot: usize) -> bool {
        self.values[slot] == NONE_VALUE
    }

    /// Exact match on every slot in `subset`.
    pub fn matches_on(&self, other: &DialogueState, subset: &[usize]) -> bool {
        subset.iter().all(|&k| self.values[k] == other.values[k])
    }

    /// Slots holding something other than `"none"`.
    pub fn set_slots(&self) -> impl Iterator<Item = (usize, &str)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.as_str() != NONE_VALUE)
            .map(|(k, v)| (k, v.as_str()))
    }
}

impl Serialize for DialogueState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.values.len()))?;
        for (k, v) in self.values.iter().enumerate() {
            map.serialize_entry(&slot_name(k), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for DialogueState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct StateVisitor;

        impl<'de> Visitor<'de> for StateVisitor {
            type Value = DialogueState;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from domain.slot to value")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut state = DialogueState::all_none();
                while let Some((key, value)) = access.next_entry::<String, String>()? {
                    let idx = slot_index_of(&key).ok_or_else(|| {
                        serde::de::Error::custom(format!("unknown slot key {key:?}"))
                    })?;
                    state.set(idx, &value);
                }
                Ok(state)
            }
        }

        deserializer.deserialize_map(StateVisitor)
    }
}
