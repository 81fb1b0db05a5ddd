//! Open candidate sets for the open-vocabulary tracker.
//!
//! A turn's candidates are the word n-grams of every utterance up to and
//! including the current user turn that were seen as slot values in
//! training, followed by the implied values `yes`, `no` and `dontcare`.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Speaker, Turn};
use crate::ontology::Ontology;
use crate::slots::{slot_keys, SlotKey, NUM_SLOTS};
use crate::state::DialogueState;
use crate::stats::percent;
use crate::text::{normalize_value, NONE_VALUE};

/// Implied values appended to every candidate set, in this order.
pub const SENTINEL_CANDIDATES: [&str; 3] = ["yes", "no", "dontcare"];

pub const DEFAULT_MAX_NGRAM: usize = 8;

/// Every non-`none` gold value seen in training, over all slots.
pub fn global_value_set(train: &[Dialogue]) -> BTreeSet<String> {
    train
        .iter()
        .flat_map(Dialogue::gold_states)
        .flat_map(|s| s.set_slots().map(|(_, v)| v.to_string()))
        .collect()
}

/// Distinct contiguous n-grams of length `1..=max_n`, in order of first
/// occurrence (by start position, then length).
pub fn extract_ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        let end_max = (start + max_n).min(tokens.len());
        for end in start + 1..=end_max {
            let gram = normalize_value(&tokens[start..end].join(" "));
            if seen.insert(gram.clone()) {
                out.push(gram);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// 1-based user-turn index.
    pub turn_index: usize,
    pub candidates: Vec<String>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, value: &str) -> bool {
        self.candidates.iter().any(|c| c == value)
    }
}

/// Accumulates history n-grams turn by turn.
#[derive(Debug, Clone)]
pub struct CandidateBuilder<'v> {
    values: &'v BTreeSet<String>,
    max_n: usize,
    seen: HashSet<String>,
    history: Vec<String>,
}

impl<'v> CandidateBuilder<'v> {
    pub fn new(values: &'v BTreeSet<String>, max_n: usize) -> Self {
        assert!(max_n >= 1, "max_n must be at least 1");
        Self {
            values,
            max_n,
            seen: HashSet::new(),
            history: Vec::new(),
        }
    }

    pub fn push_turn(&mut self, turn: &Turn) {
        for gram in extract_ngrams(&turn.tokens, self.max_n) {
            if SENTINEL_CANDIDATES.contains(&gram.as_str()) || !self.values.contains(&gram) {
                continue;
            }
            if self.seen.insert(gram.clone()) {
                self.history.push(gram);
            }
        }
    }

    pub fn snapshot(&self, turn_index: usize) -> CandidateSet {
        let mut candidates = self.history.clone();
        candidates.extend(SENTINEL_CANDIDATES.iter().map(|s| s.to_string()));
        CandidateSet {
            turn_index,
            candidates,
        }
    }
}

/// Candidate set after the `i`-th user turn (1-based).
pub fn build_candidate_set(
    dialogue: &Dialogue,
    i: usize,
    values: &BTreeSet<String>,
    max_n: usize,
) -> CandidateSet {
    let mut builder = CandidateBuilder::new(values, max_n);
    for turn in dialogue.prefix(i) {
        builder.push_turn(turn);
    }
    builder.snapshot(i)
}

/// Candidate sets for every user turn of a dialogue, in order.
pub fn dialogue_candidate_sets(
    dialogue: &Dialogue,
    values: &BTreeSet<String>,
    max_n: usize,
) -> Vec<CandidateSet> {
    let mut builder = CandidateBuilder::new(values, max_n);
    let mut out = Vec::new();
    for turn in &dialogue.turns {
        builder.push_turn(turn);
        if turn.speaker == Speaker::User {
            out.push(builder.snapshot(out.len() + 1));
        }
    }
    out
}

/// Binary targets for every (candidate, slot) pair of one turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateLabelSet {
    n_candidates: usize,
    /// `(candidate index, slot index)` pairs labelled 1.
    positives: Vec<(usize, usize)>,
}

impl CandidateLabelSet {
    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn positives(&self) -> &[(usize, usize)] {
        &self.positives
    }

    pub fn label(&self, candidate: usize, slot: usize) -> bool {
        self.positives.contains(&(candidate, slot))
    }

    /// Row-major `n_candidates x NUM_SLOTS` 0/1 targets.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_candidates * NUM_SLOTS];
        for &(j, k) in &self.positives {
            out[j * NUM_SLOTS + k] = 1.0;
        }
        out
    }
}

/// Labels a candidate 1 for a slot iff it equals the slot's cumulative gold
/// value and that value is not `none`.
pub fn label_candidates(cands: &CandidateSet, gold: &DialogueState) -> CandidateLabelSet {
    let mut positives = Vec::new();
    for (k, value) in gold.set_slots() {
        if let Some(j) = cands.candidates.iter().position(|c| c == value) {
            positives.push((j, k));
        }
    }
    positives.sort_unstable();
    CandidateLabelSet {
        n_candidates: cands.len(),
        positives,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReachability {
    pub slot: SlotKey,
    /// % of turns whose non-`none` gold value is missing from the candidate set.
    pub ov_oov_rate: f64,
    /// % of turns whose gold value is outside the slot vocabulary.
    pub jst_oov_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub n_turns: usize,
    pub max_ngram: usize,
    pub ov_unreachable_turns: usize,
    pub jst_unreachable_turns: usize,
    /// % of turns with at least one unreachable gold value (open vocabulary).
    pub ov_unreachable_rate: f64,
    /// % of turns with at least one gold value outside the vocabulary.
    pub jst_unreachable_rate: f64,
    pub ov_ceiling: f64,
    pub jst_ceiling: f64,
    pub per_slot: Vec<SlotReachability>,
}

/// Turn-level and per-slot unreachability for both paradigms on `corpus`.
pub fn reachability_report(
    corpus: &[Dialogue],
    values: &BTreeSet<String>,
    ontology: &Ontology,
    max_n: usize,
) -> ReachabilityReport {
    let mut n = 0usize;
    let mut ov_turns = 0usize;
    let mut jst_turns = 0usize;
    let mut ov_slot = [0usize; NUM_SLOTS];
    let mut jst_slot = [0usize; NUM_SLOTS];

    for dialogue in corpus {
        let sets = dialogue_candidate_sets(dialogue, values, max_n);
        for (gold, cands) in dialogue.gold_states().zip(&sets) {
            n += 1;
            let mut ov_miss = false;
            let mut jst_miss = false;
            for (k, v) in gold.values().iter().enumerate() {
                if v != NONE_VALUE && !cands.contains(v) {
                    ov_slot[k] += 1;
                    ov_miss = true;
                }
                if !ontology.contains(k, v) {
                    jst_slot[k] += 1;
                    jst_miss = true;
                }
            }
            ov_turns += usize::from(ov_miss);
            jst_turns += usize::from(jst_miss);
        }
    }

    let ov_rate = percent(ov_turns, n);
    let jst_rate = percent(jst_turns, n);
    ReachabilityReport {
        n_turns: n,
        max_ngram: max_n,
        ov_unreachable_turns: ov_turns,
        jst_unreachable_turns: jst_turns,
        ov_unreachable_rate: ov_rate,
        jst_unreachable_rate: jst_rate,
        ov_ceiling: 100.0 - ov_rate,
        jst_ceiling: 100.0 - jst_rate,
        per_slot: slot_keys()
            .into_iter()
            .enumerate()
            .map(|(k, slot)| SlotReachability {
                slot,
                ov_oov_rate: percent(ov_slot[k], n),
                jst_oov_rate: percent(jst_slot[k], n),
            })
            .collect(),
    }
}

/// One persisted candidate set, keyed by dialogue and user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub candidates: Vec<String>,
}

pub fn candidate_records(
    corpus: &[Dialogue],
    values: &BTreeSet<String>,
    max_n: usize,
) -> Vec<CandidateRecord> {
    corpus
        .iter()
        .flat_map(|d| {
            dialogue_candidate_sets(d, values, max_n)
                .into_iter()
                .map(|c| CandidateRecord {
                    dialogue_id: d.id.clone(),
                    turn_index: c.turn_index,
                    candidates: c.candidates,
                })
        })
        .collect()
}
