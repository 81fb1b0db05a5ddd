//! Per-slot value vocabularies observed in training.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::slots::NUM_SLOTS;
use crate::text::{DONTCARE_VALUE, NONE_VALUE};

/// Closed value vocabulary per slot.
///
/// Each slot's list starts with `none` and `dontcare`, followed by the other
/// observed values in lexicographic order. This order is the tie-break order
/// for argmax decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "OntologyRepr", into = "OntologyRepr")]
pub struct Ontology {
    vocab: Vec<Vec<String>>,
    observed: Vec<usize>,
    index: Vec<HashMap<String, usize>>,
}

#[derive(Serialize, Deserialize)]
struct OntologyRepr {
    vocab: Vec<Vec<String>>,
    observed: Vec<usize>,
}

impl From<OntologyRepr> for Ontology {
    fn from(r: OntologyRepr) -> Self {
        Ontology::from_parts(r.vocab, r.observed)
    }
}

impl From<Ontology> for OntologyRepr {
    fn from(o: Ontology) -> Self {
        OntologyRepr {
            vocab: o.vocab,
            observed: o.observed,
        }
    }
}

impl Ontology {
    fn from_parts(vocab: Vec<Vec<String>>, observed: Vec<usize>) -> Self {
        let index = vocab
            .iter()
            .map(|vs| vs.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect())
            .collect();
        Self {
            vocab,
            observed,
            index,
        }
    }

    /// Full vocabulary of `slot`, sentinels first.
    pub fn values(&self, slot: usize) -> &[String] {
        &self.vocab[slot]
    }

    pub fn len(&self, slot: usize) -> usize {
        self.vocab[slot].len()
    }

    pub fn position(&self, slot: usize, value: &str) -> Option<usize> {
        self.index[slot].get(value).copied()
    }

    pub fn contains(&self, slot: usize, value: &str) -> bool {
        self.index[slot].contains_key(value)
    }

    /// Number of distinct values actually seen for `slot` in training,
    /// counting `none`/`dontcare` only when they occurred.
    pub fn observed_size(&self, slot: usize) -> usize {
        self.observed[slot]
    }
}

/// Builds the per-slot vocabularies from training dialogues only.
pub fn build_ontology(train: &[Dialogue]) -> Ontology {
    let mut seen: Vec<BTreeSet<String>> = vec![BTreeSet::new(); NUM_SLOTS];
    for state in train.iter().flat_map(Dialogue::gold_states) {
        for (k, v) in state.values().iter().enumerate() {
            seen[k].insert(v.clone());
        }
    }
    let observed = seen.iter().map(BTreeSet::len).collect();
    let vocab = seen
        .into_iter()
        .map(|set| {
            let mut vs = vec![NONE_VALUE.to_string(), DONTCARE_VALUE.to_string()];
            vs.extend(
                set.into_iter()
                    .filter(|v| v != NONE_VALUE && v != DONTCARE_VALUE),
            );
            vs
        })
        .collect();
    Ontology::from_parts(vocab, observed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use crate::slots::slot_index;
    use crate::state::DialogueState;

    #[test]
    fn single_value_slot_gets_sentinels() {
        let day = slot_index("hotel", "day").unwrap();
        let mut s = DialogueState::all_none();
        s.set(day, "monday");
        let d = Dialogue {
            id: "x".into(),
            turns: vec![Turn::user("monday please", s)],
        };
        let o = build_ontology(&[d]);
        assert_eq!(o.values(day), ["none", "dontcare", "monday"]);
        // the only gold value for hotel.day in training is "monday"
        assert_eq!(o.observed_size(day), 1);
        let area = slot_index("hotel", "area").unwrap();
        assert_eq!(o.values(area), ["none", "dontcare"]);
        assert_eq!(o.observed_size(area), 1);
        assert!(o.contains(day, "monday") && !o.contains(day, "tuesday"));
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let o = build_ontology(&[]);
        let back: Ontology = serde_json::from_str(&serde_json::to_string(&o).unwrap()).unwrap();
        assert_eq!(back, o);
        assert_eq!(back.position(0, "dontcare"), Some(1));
    }
}
