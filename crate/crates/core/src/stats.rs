//! Deterministic dataset and per-slot statistics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Speaker};
use crate::ontology::Ontology;
use crate::slots::{slot_keys, SlotKey, NUM_SLOTS};
use crate::text::is_numeric_token;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_dialogues: usize,
    pub n_user_turns: usize,
    pub user_vocab_with_numeric: usize,
    pub user_vocab_without_numeric: usize,
    /// Median token count over user turns (mean of the two middle values
    /// for an even count; 0 for an empty corpus).
    pub median_user_turn_tokens: f64,
}

pub fn corpus_stats(corpus: &[Dialogue]) -> CorpusStats {
    let mut vocab: HashSet<&str> = HashSet::new();
    let mut lengths = Vec::new();
    for turn in corpus
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::User)
    {
        lengths.push(turn.tokens.len());
        vocab.extend(turn.tokens.iter().map(String::as_str));
    }
    let numeric = vocab.iter().filter(|t| is_numeric_token(t)).count();
    CorpusStats {
        n_dialogues: corpus.len(),
        n_user_turns: lengths.len(),
        user_vocab_with_numeric: vocab.len(),
        user_vocab_without_numeric: vocab.len() - numeric,
        median_user_turn_tokens: median(&mut lengths),
    }
}

fn median(values: &mut [usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotStatsRow {
    pub slot: SlotKey,
    /// Distinct values seen for the slot in training.
    pub vocab_size: usize,
    /// Percentage of dev user turns where the slot is `none`.
    pub pct_none: f64,
    /// Percentage of dev user turns whose gold value lies outside the slot
    /// vocabulary.
    pub jst_oov_rate: f64,
}

/// Per-slot vocabulary size, `%None` and closed-vocabulary OOV rate.
///
/// `train` is accepted for symmetry with the corpus layout; vocabulary sizes
/// come from `ontology`, which must have been built from it.
pub fn slot_stats(_train: &[Dialogue], dev: &[Dialogue], ontology: &Ontology) -> Vec<SlotStatsRow> {
    let mut none = [0usize; NUM_SLOTS];
    let mut oov = [0usize; NUM_SLOTS];
    let mut n = 0usize;
    for state in dev.iter().flat_map(Dialogue::gold_states) {
        n += 1;
        for k in 0..NUM_SLOTS {
            if state.is_none(k) {
                none[k] += 1;
            }
            if !ontology.contains(k, state.get(k)) {
                oov[k] += 1;
            }
        }
    }
    slot_keys()
        .into_iter()
        .enumerate()
        .map(|(k, slot)| SlotStatsRow {
            slot,
            vocab_size: ontology.observed_size(k),
            pct_none: if n == 0 { 100.0 } else { percent(none[k], n) },
            jst_oov_rate: percent(oov[k], n),
        })
        .collect()
}

pub(crate) fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}
