//! The common per-turn prediction format shared by both trackers, the hybrid
//! and the evaluator.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::error::AlignmentError;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::state::DialogueState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub dialogue_id: String,
    /// 1-based user turn.
    pub turn_index: usize,
    pub state: DialogueState,
}

/// Predicted states keyed by `(dialogue id, user turn)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    states: BTreeMap<(String, usize), DialogueState>,
}

impl Predictions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dialogue_id: &str, turn_index: usize, state: DialogueState) {
        self.states.insert((dialogue_id.to_string(), turn_index), state);
    }

    /// Adds the per-turn states of one dialogue, numbering turns from 1.
    pub fn insert_dialogue(&mut self, dialogue_id: &str, states: Vec<DialogueState>) {
        for (i, s) in states.into_iter().enumerate() {
            self.insert(dialogue_id, i + 1, s);
        }
    }

    pub fn get(&self, dialogue_id: &str, turn_index: usize) -> Option<&DialogueState> {
        self.states.get(&(dialogue_id.to_string(), turn_index))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &(String, usize)> {
        self.states.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, usize), &DialogueState)> {
        self.states.iter()
    }

    pub fn records(&self) -> Vec<PredictionRecord> {
        self.states
            .iter()
            .map(|((id, t), s)| PredictionRecord {
                dialogue_id: id.clone(),
                turn_index: *t,
                state: s.clone(),
            })
            .collect()
    }

    pub fn from_records(records: impl IntoIterator<Item = PredictionRecord>) -> Self {
        let mut p = Self::new();
        for r in records {
            p.insert(&r.dialogue_id, r.turn_index, r.state);
        }
        p
    }

    /// Gold and predicted state for every user turn of `gold`, in corpus order.
    pub fn align<'a>(
        &'a self,
        gold: &'a [Dialogue],
    ) -> Result<Vec<(&'a DialogueState, &'a DialogueState)>, AlignmentError> {
        let mut pairs = Vec::new();
        let mut missing = Vec::new();
        for d in gold {
            for (i, g) in d.gold_states().enumerate() {
                match self.get(&d.id, i + 1) {
                    Some(p) => pairs.push((g, p)),
                    None => missing.push((d.id.clone(), i + 1)),
                }
            }
        }
        if missing.is_empty() {
            Ok(pairs)
        } else {
            Err(AlignmentError::MissingTurns(missing))
        }
    }

    /// Errors unless `self` and `other` cover exactly the same turns.
    pub fn check_aligned(&self, other: &Predictions) -> Result<(), AlignmentError> {
        if let Some(k) = self.keys().find(|k| !other.states.contains_key(*k)) {
            return Err(AlignmentError::Misaligned(format!(
                "turn {} of {} is missing from one prediction set",
                k.1, k.0
            )));
        }
        if let Some(k) = other.keys().find(|k| !self.states.contains_key(*k)) {
            return Err(AlignmentError::Misaligned(format!(
                "turn {} of {} is missing from one prediction set",
                k.1, k.0
            )));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        write_jsonl(path, &self.records())
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        Ok(Self::from_records(read_jsonl::<PredictionRecord>(path)?))
    }

    /// Gold states of `corpus` as predictions.
    pub fn from_gold(corpus: &[Dialogue]) -> Self {
        let mut p = Self::new();
        for d in corpus {
            p.insert_dialogue(&d.id, d.gold_states().cloned().collect());
        }
        p
    }

    /// All-`none` prediction for every user turn of `corpus`.
    pub fn all_none(corpus: &[Dialogue]) -> Self {
        let mut p = Self::new();
        for d in corpus {
            p.insert_dialogue(&d.id, vec![DialogueState::all_none(); d.num_user_turns()]);
        }
        p
    }
}
