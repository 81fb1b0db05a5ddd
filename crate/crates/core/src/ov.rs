//! Open-vocabulary tracker: scores every (candidate, slot) pair of a turn
//! against the turn context and folds positive decisions into the state.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{dialogue_candidate_sets, label_candidates, CandidateLabelSet, CandidateSet};
use crate::corpus::Dialogue;
use crate::error::CheckpointError;
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint, restore_params};
use crate::nn::encoder::{ContextEncoder, DialogueInput, EncoderConfig, TurnContext};
use crate::nn::graph::{Graph, ParamStore, Tensor, Var};
use crate::nn::layers::Linear;
use crate::nn::train::Trainable;
use crate::nn::vocab::{corpus_vocabs, Vocab, UNK};
use crate::predictions::Predictions;
use crate::slots::NUM_SLOTS;
use crate::state::DialogueState;
use crate::text::tokenize;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Probability clamp used by [`ov_loss`].
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvConfig {
    pub encoder: EncoderConfig,
    pub max_ngram: usize,
    pub threshold: f64,
}

impl Default for OvConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::ov(),
            max_ngram: crate::candidates::DEFAULT_MAX_NGRAM,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Everything needed to rebuild an [`OvModel`] apart from its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvSpec {
    pub config: OvConfig,
    pub vocab: Vocab,
    pub act_vocab: Vocab,
    /// Training value set that candidates are filtered against.
    pub values: BTreeSet<String>,
    pub seed: u64,
}

impl OvSpec {
    pub fn from_train(train: &[Dialogue], config: OvConfig, seed: u64) -> Self {
        let values = crate::candidates::global_value_set(train);
        let (vocab, act_vocab) = corpus_vocabs(train, values.iter().map(String::as_str));
        Self {
            config,
            vocab,
            act_vocab,
            values,
            seed,
        }
    }
}

pub struct OvModel {
    pub spec: OvSpec,
    pub store: ParamStore,
    encoder: ContextEncoder,
    hidden: Linear,
    heads: Linear,
}

/// Probabilities for every (candidate, slot) pair of one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub turn_index: usize,
    pub candidates: Vec<String>,
    /// Row-major `candidates x NUM_SLOTS`.
    pub probs: Vec<f64>,
}

impl ScoredCandidates {
    pub fn prob(&self, candidate: usize, slot: usize) -> f64 {
        self.probs[candidate * NUM_SLOTS + slot]
    }
}

/// A training dialogue with its candidate rows and binary targets.
pub struct OvExample {
    input: DialogueInput,
    candidate_tokens: Vec<Vec<usize>>,
    row_turns: Vec<usize>,
    targets: Tensor,
}

impl OvModel {
    pub fn new(spec: OvSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let enc = &spec.config.encoder;
        let encoder = ContextEncoder::new(&mut store, enc, spec.vocab.len(), spec.act_vocab.len(), &mut rng);
        let hidden = Linear::new(
            &mut store,
            "ov.hidden",
            enc.token_embed_dim + enc.context_dim(),
            enc.context_ff_dim,
            &mut rng,
        );
        let heads = Linear::new(&mut store, "ov.heads", enc.context_ff_dim, NUM_SLOTS, &mut rng);
        Self {
            spec,
            store,
            encoder,
            hidden,
            heads,
        }
    }

    /// Sets each slot head's bias to the log-odds of a positive label among
    /// the training rows, smoothed by one pseudo-count each way.
    pub fn init_output_prior(&mut self, examples: &[OvExample]) {
        let mut pos = [1.0f64; NUM_SLOTS];
        let mut rows = 2.0;
        for ex in examples {
            rows += ex.targets.nrows() as f64;
            for row in ex.targets.rows() {
                for (k, &y) in row.iter().enumerate() {
                    pos[k] += y;
                }
            }
        }
        let bias = self.store.get_mut(self.heads.bias);
        for k in 0..NUM_SLOTS {
            let p = pos[k] / rows;
            bias[[0, k]] = (p / (1.0 - p)).ln();
        }
    }

    pub fn encoder(&self) -> &ContextEncoder {
        &self.encoder
    }

    pub fn heads(&self) -> &Linear {
        &self.heads
    }

    pub fn input(&self, dialogue: &Dialogue) -> DialogueInput {
        DialogueInput::new(dialogue, &self.spec.vocab, &self.spec.act_vocab)
    }

    /// Candidate sets of every user turn under this model's value set.
    pub fn candidate_sets(&self, dialogue: &Dialogue) -> Vec<CandidateSet> {
        dialogue_candidate_sets(dialogue, &self.spec.values, self.spec.config.max_ngram)
    }

    /// Token ids of a candidate; its embedding is the mean of these rows.
    pub fn candidate_ids(&self, candidate: &str) -> Vec<usize> {
        let ids = self.spec.vocab.ids(&tokenize(candidate));
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }

    fn rows(&self, sets: &[CandidateSet]) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut tokens = Vec::new();
        let mut turns = Vec::new();
        for (t, set) in sets.iter().enumerate() {
            for c in &set.candidates {
                tokens.push(self.candidate_ids(c));
                turns.push(t);
            }
        }
        (tokens, turns)
    }

    /// Head logits for candidate rows paired with rows of `features`.
    fn head_logits(&self, g: &mut Graph, features: Var, tokens: Vec<Vec<usize>>, turns: Vec<usize>) -> Var {
        let cand = g.embed(self.encoder.token_embed, tokens);
        let ctx = g.select_rows(features, turns);
        let x = g.concat(&[cand, ctx]);
        let h = self.hidden.forward(g, x);
        let h = g.tanh(h);
        self.heads.forward(g, h)
    }

    fn dialogue_logits(&self, g: &mut Graph, input: &DialogueInput, tokens: Vec<Vec<usize>>, turns: Vec<usize>) -> Var {
        let ctx = self.encoder.encode(g, input);
        self.head_logits(g, ctx.features, tokens, turns)
    }

    pub fn example(&self, dialogue: &Dialogue) -> Option<OvExample> {
        if dialogue.num_user_turns() == 0 {
            return None;
        }
        let sets = self.candidate_sets(dialogue);
        let (candidate_tokens, row_turns) = self.rows(&sets);
        let mut targets = Vec::with_capacity(row_turns.len() * NUM_SLOTS);
        for (set, gold) in sets.iter().zip(dialogue.gold_states()) {
            targets.extend(label_candidates(set, gold).dense());
        }
        let targets = Tensor::from_shape_vec((row_turns.len(), NUM_SLOTS), targets).expect("label shape");
        Some(OvExample {
            input: self.input(dialogue),
            candidate_tokens,
            row_turns,
            targets,
        })
    }

    pub fn examples(&self, corpus: &[Dialogue]) -> Vec<OvExample> {
        corpus.par_iter().filter_map(|d| self.example(d)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        encode_checkpoint(&self.spec, &self.store)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let (spec, loaded): (OvSpec, ParamStore) = decode_checkpoint(bytes)?;
        let mut model = Self::new(spec);
        restore_params(&mut model.store, &loaded)?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl Trainable for OvModel {
    type Example = OvExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss(&self, g: &mut Graph, ex: &OvExample) -> Var {
        let logits = self.dialogue_logits(g, &ex.input, ex.candidate_tokens.clone(), ex.row_turns.clone());
        g.bce_with_logits(logits, ex.targets.clone())
    }
}

fn to_scored(g: &Graph, probs: Var, sets: &[CandidateSet]) -> Vec<ScoredCandidates> {
    let values = g.value(probs);
    let mut row = 0;
    sets.iter()
        .map(|set| {
            let n = set.len();
            let block = values.slice(ndarray::s![row..row + n, ..]);
            row += n;
            ScoredCandidates {
                turn_index: set.turn_index,
                candidates: set.candidates.clone(),
                probs: block.iter().copied().collect(),
            }
        })
        .collect()
}

/// Scores one turn's candidates against an already computed turn context.
pub fn ov_score(model: &OvModel, cands: &CandidateSet, context: &TurnContext) -> ScoredCandidates {
    let mut g = Graph::new(&model.store);
    let width = context.features.len();
    let features = g.constant(Tensor::from_shape_vec((1, width), context.features.clone()).expect("context row"));
    let tokens = cands.candidates.iter().map(|c| model.candidate_ids(c)).collect();
    let logits = model.head_logits(&mut g, features, tokens, vec![0; cands.len()]);
    let probs = g.sigmoid(logits);
    to_scored(&g, probs, std::slice::from_ref(cands)).remove(0)
}

/// Negative binary log-likelihood of 0/1 `labels` under `probs`, with
/// probabilities clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn binary_log_loss(probs: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "scores and labels differ in length");
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

pub fn ov_loss(scores: &ScoredCandidates, labels: &CandidateLabelSet) -> f64 {
    binary_log_loss(&scores.probs, &labels.dense())
}

/// Per slot, the highest-scoring candidate at or above `threshold` replaces
/// the previous value; earlier candidates win ties. Other slots keep `prev`.
pub fn ov_update_state(prev: &DialogueState, scored: &ScoredCandidates, threshold: f64) -> DialogueState {
    let mut next = prev.clone();
    for k in 0..NUM_SLOTS {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..scored.candidates.len() {
            let p = scored.prob(j, k);
            if p >= threshold && best.map_or(true, |(_, b)| p > b) {
                best = Some((j, p));
            }
        }
        if let Some((j, _)) = best {
            next.set(k, &scored.candidates[j]);
        }
    }
    next
}

/// Anything that can score the candidate sets of a dialogue.
pub trait CandidateScorer: Sync {
    fn score_dialogue(&self, dialogue: &Dialogue, sets: &[CandidateSet]) -> Vec<ScoredCandidates>;
}

impl CandidateScorer for OvModel {
    fn score_dialogue(&self, dialogue: &Dialogue, sets: &[CandidateSet]) -> Vec<ScoredCandidates> {
        if sets.is_empty() {
            return Vec::new();
        }
        let mut g = Graph::new(&self.store);
        let (tokens, turns) = self.rows(sets);
        let logits = self.dialogue_logits(&mut g, &self.input(dialogue), tokens, turns);
        let probs = g.sigmoid(logits);
        to_scored(&g, probs, sets)
    }
}

/// Scores 1 exactly on the pairs labelled positive by the gold state.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl CandidateScorer for OracleScorer {
    fn score_dialogue(&self, dialogue: &Dialogue, sets: &[CandidateSet]) -> Vec<ScoredCandidates> {
        sets.iter()
            .zip(dialogue.gold_states())
            .map(|(set, gold)| ScoredCandidates {
                turn_index: set.turn_index,
                candidates: set.candidates.clone(),
                probs: label_candidates(set, gold).dense(),
            })
            .collect()
    }
}

/// Per-turn states from folding [`ov_update_state`] over the dialogue,
/// starting from the all-`none` state.
pub fn ov_track(
    scorer: &impl CandidateScorer,
    dialogue: &Dialogue,
    values: &BTreeSet<String>,
    max_n: usize,
    threshold: f64,
) -> Vec<DialogueState> {
    let sets = dialogue_candidate_sets(dialogue, values, max_n);
    let mut state = DialogueState::all_none();
    scorer
        .score_dialogue(dialogue, &sets)
        .iter()
        .map(|scored| {
            state = ov_update_state(&state, scored, threshold);
            state.clone()
        })
        .collect()
}

/// Tracks every dialogue of `corpus` in parallel.
pub fn ov_predict(
    scorer: &impl CandidateScorer,
    corpus: &[Dialogue],
    values: &BTreeSet<String>,
    max_n: usize,
    threshold: f64,
) -> Predictions {
    let tracked: Vec<(String, Vec<DialogueState>)> = corpus
        .par_iter()
        .map(|d| (d.id.clone(), ov_track(scorer, d, values, max_n, threshold)))
        .collect();
    let mut out = Predictions::new();
    for (id, states) in tracked {
        out.insert_dialogue(&id, states);
    }
    out
}

impl OvModel {
    pub fn predict(&self, corpus: &[Dialogue]) -> Predictions {
        let c = &self.spec.config;
        ov_predict(self, corpus, &self.spec.values, c.max_ngram, c.threshold)
    }
}
