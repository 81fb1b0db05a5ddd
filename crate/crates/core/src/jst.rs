//! Joint state tracker: a per-slot softmax over the training value
//! vocabulary, predicted from the dialogue-level encoding of each turn.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::error::CheckpointError;
use crate::nn::checkpoint::{decode_checkpoint, encode_checkpoint, restore_params};
use crate::nn::encoder::{ContextEncoder, DialogueInput, EncoderConfig};
use crate::nn::graph::{log_sum_exp, Graph, ParamStore, Var};
use crate::nn::layers::Linear;
use crate::nn::train::Trainable;
use crate::nn::vocab::{corpus_vocabs, Vocab};
use crate::ontology::{build_ontology, Ontology};
use crate::predictions::Predictions;
use crate::slots::NUM_SLOTS;
use crate::state::DialogueState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JstConfig {
    pub encoder: EncoderConfig,
}

impl Default for JstConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::jst(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JstSpec {
    pub config: JstConfig,
    pub vocab: Vocab,
    pub act_vocab: Vocab,
    pub ontology: Ontology,
    pub seed: u64,
}

impl JstSpec {
    pub fn from_train(train: &[Dialogue], config: JstConfig, seed: u64) -> Self {
        let (vocab, act_vocab) = corpus_vocabs(train, std::iter::empty());
        Self {
            config,
            vocab,
            act_vocab,
            ontology: build_ontology(train),
            seed,
        }
    }
}

pub struct JstModel {
    pub spec: JstSpec,
    pub store: ParamStore,
    encoder: ContextEncoder,
    heads: Linear,
    /// First logit column of each slot; slot `k` owns `|V_k| + 1` columns,
    /// the last of which is the training-only unknown value.
    offsets: Vec<usize>,
}

/// One turn's predicted state and per-slot distributions over `V_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct JstPrediction {
    pub state: DialogueState,
    pub distributions: Vec<Vec<f64>>,
}

pub struct JstExample {
    input: DialogueInput,
    /// Per slot, the gold index of every turn.
    targets: Vec<Vec<usize>>,
}

/// Gold index of each slot value in `V_k`, or `|V_k|` when out of vocabulary.
pub fn gold_indices(ontology: &Ontology, gold: &DialogueState) -> Vec<usize> {
    (0..NUM_SLOTS)
        .map(|k| ontology.position(k, gold.get(k)).unwrap_or(ontology.len(k)))
        .collect()
}

/// Sum over slots of the negative log probability of the gold index.
pub fn jst_loss(distributions: &[Vec<f64>], gold: &[usize]) -> f64 {
    distributions
        .iter()
        .zip(gold)
        .map(|(d, &g)| -d.get(g).copied().unwrap_or(0.0).ln())
        .sum()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits.iter().copied());
    logits.iter().map(|x| (x - lse).exp()).collect()
}

/// Index of the largest entry, preferring the earliest on ties.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl JstModel {
    pub fn new(spec: JstSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut store = ParamStore::new();
        let enc = &spec.config.encoder;
        let encoder = ContextEncoder::new(&mut store, enc, spec.vocab.len(), spec.act_vocab.len(), &mut rng);
        let mut offsets = Vec::with_capacity(NUM_SLOTS);
        let mut total = 0;
        for k in 0..NUM_SLOTS {
            offsets.push(total);
            total += spec.ontology.len(k) + 1;
        }
        let heads = Linear::new(&mut store, "jst.heads", enc.dialogue_hidden_dim, total, &mut rng);
        Self {
            spec,
            store,
            encoder,
            heads,
            offsets,
        }
    }

    /// Sets each slot's output bias to the smoothed log frequency of its
    /// values in `train`, so training starts from the label prior instead of
    /// spending its first updates (and saturating the encoder) learning it.
    pub fn init_output_prior(&mut self, train: &[Dialogue]) {
        let bias = self.store.get_mut(self.heads.bias);
        for k in 0..NUM_SLOTS {
            let n = self.spec.ontology.len(k) + 1;
            let mut counts = vec![1.0; n];
            for state in train.iter().flat_map(Dialogue::gold_states) {
                counts[self.spec.ontology.position(k, state.get(k)).unwrap_or(n - 1)] += 1.0;
            }
            let total: f64 = counts.iter().sum();
            for (i, c) in counts.iter().enumerate() {
                bias[[0, self.offsets[k] + i]] = (c / total).ln();
            }
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

    fn logits(&self, g: &mut Graph, input: &DialogueInput) -> Var {
        let ctx = self.encoder.encode(g, input);
        self.heads.forward(g, ctx.dialogue)
    }

    pub fn example(&self, dialogue: &Dialogue) -> Option<JstExample> {
        if dialogue.num_user_turns() == 0 {
            return None;
        }
        let per_turn: Vec<Vec<usize>> = dialogue
            .gold_states()
            .map(|s| gold_indices(&self.spec.ontology, s))
            .collect();
        let targets = (0..NUM_SLOTS)
            .map(|k| per_turn.iter().map(|t| t[k]).collect())
            .collect();
        Some(JstExample {
            input: self.input(dialogue),
            targets,
        })
    }

    pub fn examples(&self, corpus: &[Dialogue]) -> Vec<JstExample> {
        corpus.par_iter().filter_map(|d| self.example(d)).collect()
    }

    /// Predictions for every user turn of `dialogue`. Turn `i` only depends
    /// on the dialogue up to its `i`-th user utterance.
    pub fn track_with_distributions(&self, dialogue: &Dialogue) -> Vec<JstPrediction> {
        if dialogue.num_user_turns() == 0 {
            return Vec::new();
        }
        let mut g = Graph::new(&self.store);
        let logits = self.logits(&mut g, &self.input(dialogue));
        let values = g.value(logits);
        values
            .rows()
            .into_iter()
            .map(|row| {
                let mut state = DialogueState::all_none();
                let mut distributions = Vec::with_capacity(NUM_SLOTS);
                for k in 0..NUM_SLOTS {
                    let n = self.spec.ontology.len(k);
                    let start = self.offsets[k];
                    let slice: Vec<f64> = row.iter().skip(start).take(n).copied().collect();
                    let dist = softmax(&slice);
                    state.set(k, &self.spec.ontology.values(k)[argmax(&dist)]);
                    distributions.push(dist);
                }
                JstPrediction { state, distributions }
            })
            .collect()
    }

    pub fn predict(&self, corpus: &[Dialogue]) -> Predictions {
        let tracked: Vec<(String, Vec<DialogueState>)> = corpus
            .par_iter()
            .map(|d| (d.id.clone(), jst_track(self, d)))
            .collect();
        let mut out = Predictions::new();
        for (id, states) in tracked {
            out.insert_dialogue(&id, states);
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CheckpointError> {
        encode_checkpoint(&self.spec, &self.store)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let (spec, loaded): (JstSpec, ParamStore) = decode_checkpoint(bytes)?;
        let mut model = Self::new(spec);
        restore_params(&mut model.store, &loaded)?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl Trainable for JstModel {
    type Example = JstExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss(&self, g: &mut Graph, ex: &JstExample) -> Var {
        let logits = self.logits(g, &ex.input);
        let losses: Vec<Var> = (0..NUM_SLOTS)
            .map(|k| {
                let start = self.offsets[k];
                let slot = g.slice_cols(logits, start, start + self.spec.ontology.len(k) + 1);
                g.softmax_xent(slot, ex.targets[k].clone())
            })
            .collect();
        g.sum(&losses)
    }
}

/// Prediction at the last user turn of `prefix`.
pub fn jst_predict(model: &JstModel, prefix: &Dialogue) -> Option<JstPrediction> {
    model.track_with_distributions(prefix).pop()
}

pub fn jst_track(model: &JstModel, dialogue: &Dialogue) -> Vec<DialogueState> {
    model
        .track_with_distributions(dialogue)
        .into_iter()
        .map(|p| p.state)
        .collect()
}
