//! Per-slot method selection between the two trackers, prediction stitching,
//! and majority-vote ensembling of independent runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Dialogue;
use crate::error::AlignmentError;
use crate::predictions::Predictions;
use crate::slots::{slot_index_of, slot_name, NUM_SLOTS};
use crate::state::DialogueState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "JST")]
    Jst,
    #[serde(rename = "OVST")]
    Ovst,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Jst => "JST",
            Method::Ovst => "OVST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-slot exact-match accuracy over every gold user turn.
pub fn per_slot_accuracy(preds: &Predictions, gold: &[Dialogue]) -> Result<Vec<f64>, AlignmentError> {
    let pairs = preds.align(gold)?;
    let mut hits = [0usize; NUM_SLOTS];
    for (g, p) in &pairs {
        for (k, hit) in hits.iter_mut().enumerate() {
            *hit += usize::from(g.get(k) == p.get(k));
        }
    }
    let n = pairs.len();
    Ok(hits
        .iter()
        .map(|&h| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect())
}

/// Dev accuracy of both methods for every slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAccuracyTable {
    pub jst: Vec<f64>,
    pub ovst: Vec<f64>,
}

impl SlotAccuracyTable {
    pub fn compute(jst: &Predictions, ovst: &Predictions, dev: &[Dialogue]) -> Result<Self, AlignmentError> {
        Ok(Self {
            jst: per_slot_accuracy(jst, dev)?,
            ovst: per_slot_accuracy(ovst, dev)?,
        })
    }

    pub fn get(&self, slot: usize, method: Method) -> f64 {
        match method {
            Method::Jst => self.jst[slot],
            Method::Ovst => self.ovst[slot],
        }
    }
}

/// The method chosen for every slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridAssignment {
    methods: Vec<Method>,
}

impl HybridAssignment {
    pub fn uniform(method: Method) -> Self {
        Self {
            methods: vec![method; NUM_SLOTS],
        }
    }

    pub fn from_methods(methods: Vec<Method>) -> Self {
        assert_eq!(methods.len(), NUM_SLOTS, "assignment must cover every slot");
        Self { methods }
    }

    pub fn method(&self, slot: usize) -> Method {
        self.methods[slot]
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    /// Slots assigned to the open-vocabulary tracker.
    pub fn ovst_slots(&self) -> Vec<usize> {
        (0..NUM_SLOTS).filter(|&k| self.methods[k] == Method::Ovst).collect()
    }
}

impl Serialize for HybridAssignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(NUM_SLOTS))?;
        for (k, m) in self.methods.iter().enumerate() {
            map.serialize_entry(&slot_name(k), m)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for HybridAssignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = BTreeMap::<String, Method>::deserialize(deserializer)?;
        let mut methods: Vec<Option<Method>> = vec![None; NUM_SLOTS];
        for (key, m) in raw {
            let k = slot_index_of(&key).ok_or_else(|| D::Error::custom(format!("unknown slot key {key:?}")))?;
            methods[k] = Some(m);
        }
        let methods = methods
            .into_iter()
            .enumerate()
            .map(|(k, m)| m.ok_or_else(|| D::Error::custom(format!("no method for {}", slot_name(k)))))
            .collect::<Result<_, _>>()?;
        Ok(Self { methods })
    }
}

/// Picks the more accurate method per slot; ties go to the joint tracker.
pub fn select_methods(table: &SlotAccuracyTable) -> HybridAssignment {
    HybridAssignment {
        methods: (0..NUM_SLOTS)
            .map(|k| {
                if table.ovst[k] > table.jst[k] {
                    Method::Ovst
                } else {
                    Method::Jst
                }
            })
            .collect(),
    }
}

/// Takes each slot's value from the prediction set of its assigned method.
pub fn combine(
    jst: &Predictions,
    ovst: &Predictions,
    assignment: &HybridAssignment,
) -> Result<Predictions, AlignmentError> {
    jst.check_aligned(ovst)?;
    let mut out = Predictions::new();
    for ((id, turn), j) in jst.iter() {
        let o = ovst.get(id, *turn).expect("aligned");
        let mut state = DialogueState::all_none();
        for k in 0..NUM_SLOTS {
            let v = match assignment.method(k) {
                Method::Jst => j.get(k),
                Method::Ovst => o.get(k),
            };
            state.set(k, v);
        }
        out.insert(id, *turn, state);
    }
    Ok(out)
}

/// One run's predictions and its dev joint accuracy, used to break ties.
#[derive(Debug, Clone, Copy)]
pub struct Run<'a> {
    pub predictions: &'a Predictions,
    pub dev_accuracy: f64,
}

/// Per turn and slot, the value most runs agree on. When no single value has
/// the most votes, the tied value predicted by the run with the best dev
/// accuracy wins, and equal dev accuracies fall back to the smallest value,
/// so the result never depends on argument order.
pub fn ensemble_vote(runs: &[Run]) -> Result<Predictions, AlignmentError> {
    if runs.is_empty() || runs.len() % 2 == 0 {
        return Err(AlignmentError::RunCount(runs.len()));
    }
    for r in &runs[1..] {
        runs[0].predictions.check_aligned(r.predictions)?;
    }
    let mut out = Predictions::new();
    for ((id, turn), _) in runs[0].predictions.iter() {
        let states: Vec<&DialogueState> = runs
            .iter()
            .map(|r| r.predictions.get(id, *turn).expect("aligned"))
            .collect();
        let mut voted = DialogueState::all_none();
        for k in 0..NUM_SLOTS {
            voted.set(k, vote(runs, &states, k));
        }
        out.insert(id, *turn, voted);
    }
    Ok(out)
}

fn vote<'s>(runs: &[Run], states: &[&'s DialogueState], slot: usize) -> &'s str {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in states {
        *counts.entry(s.get(slot)).or_default() += 1;
    }
    let top = *counts.values().max().expect("at least one run");
    let tied: Vec<&str> = counts.iter().filter(|(_, &c)| c == top).map(|(v, _)| *v).collect();
    if tied.len() == 1 {
        return states
            .iter()
            .map(|s| s.get(slot))
            .find(|v| *v == tied[0])
            .expect("voted value");
    }
    let mut best: Option<(f64, &str)> = None;
    for (r, s) in runs.iter().zip(states) {
        let v = s.get(slot);
        if !tied.contains(&v) {
            continue;
        }
        let better = match best {
            None => true,
            Some((acc, bv)) => r.dev_accuracy > acc || (r.dev_accuracy == acc && v < bv),
        };
        if better {
            best = Some((r.dev_accuracy, v));
        }
    }
    best.expect("a tied value").1
}
