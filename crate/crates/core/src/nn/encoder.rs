//! Shared context encoders: a bidirectional utterance LSTM, a unidirectional
//! dialogue-level LSTM over utterance vectors, and an LSTM over agent
//! dialogue acts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, ParamId, ParamStore, Tensor, Var};
use super::layers::{uniform, Lstm};
use super::vocab::{Vocab, PAD};
use crate::corpus::{Dialogue, Speaker};

/// Embedding rows start with unit variance so token identity survives the
/// first recurrent layer.
const EMBED_INIT: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub token_embed_dim: usize,
    pub utterance_hidden_dim: usize,
    pub dialogue_hidden_dim: usize,
    pub act_embed_dim: usize,
    pub act_hidden_dim: usize,
    pub context_ff_dim: usize,
    pub max_turn_tokens: usize,
    pub max_history_turns: usize,
    /// Whether agent dialogue acts feed the context.
    pub use_acts: bool,
}

impl EncoderConfig {
    /// Open-vocabulary tracker dimensions.
    pub fn ov() -> Self {
        Self {
            token_embed_dim: 300,
            utterance_hidden_dim: 256,
            dialogue_hidden_dim: 512,
            act_embed_dim: 50,
            act_hidden_dim: 64,
            context_ff_dim: 256,
            max_turn_tokens: 30,
            max_history_turns: 30,
            use_acts: true,
        }
    }

    /// Joint tracker dimensions; agent acts are not used.
    pub fn jst() -> Self {
        Self {
            token_embed_dim: 300,
            utterance_hidden_dim: 200,
            dialogue_hidden_dim: 150,
            act_embed_dim: 300,
            act_hidden_dim: 64,
            context_ff_dim: 256,
            max_turn_tokens: 30,
            max_history_turns: 30,
            use_acts: false,
        }
    }

    /// Small dimensions for quick CPU runs.
    pub fn desk(use_acts: bool) -> Self {
        Self {
            token_embed_dim: 32,
            utterance_hidden_dim: 32,
            dialogue_hidden_dim: 32,
            act_embed_dim: 8,
            act_hidden_dim: 16,
            context_ff_dim: 32,
            max_turn_tokens: 30,
            max_history_turns: 30,
            use_acts,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let dims = [
            ("token_embed_dim", self.token_embed_dim),
            ("utterance_hidden_dim", self.utterance_hidden_dim),
            ("dialogue_hidden_dim", self.dialogue_hidden_dim),
            ("act_embed_dim", self.act_embed_dim),
            ("act_hidden_dim", self.act_hidden_dim),
            ("context_ff_dim", self.context_ff_dim),
            ("max_turn_tokens", self.max_turn_tokens),
            ("max_history_turns", self.max_history_turns),
        ];
        match dims.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("{name} must be positive")),
            None => Ok(()),
        }
    }

    pub fn utterance_dim(&self) -> usize {
        2 * self.utterance_hidden_dim
    }

    /// Width of the concatenated turn context `[E; Z; A]`.
    pub fn context_dim(&self) -> usize {
        self.utterance_dim()
            + self.dialogue_hidden_dim
            + if self.use_acts { self.act_hidden_dim } else { 0 }
    }
}

/// Token and act ids for every user turn of one dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueInput {
    /// Token ids of user turn `i`.
    pub utterances: Vec<Vec<usize>>,
    /// Act ids of the agent turn preceding user turn `i` (empty for the
    /// opening turn of a dialogue that starts with the user).
    pub acts: Vec<Vec<usize>>,
}

impl DialogueInput {
    pub fn new(dialogue: &Dialogue, vocab: &Vocab, act_vocab: &Vocab) -> Self {
        let mut utterances = Vec::new();
        let mut acts = Vec::new();
        let mut pending = Vec::new();
        for turn in &dialogue.turns {
            match turn.speaker {
                Speaker::Agent => pending.extend(act_vocab.ids(&turn.acts)),
                Speaker::User => {
                    utterances.push(vocab.ids(&turn.tokens));
                    acts.push(std::mem::take(&mut pending));
                }
            }
        }
        Self { utterances, acts }
    }

    pub fn num_turns(&self) -> usize {
        self.utterances.len()
    }
}

/// Graph handles for the encoded turns of one dialogue; row `i` of each
/// matrix belongs to user turn `i`.
#[derive(Debug, Clone, Copy)]
pub struct EncodedContext {
    pub utterances: Var,
    pub dialogue: Var,
    pub acts: Option<Var>,
    pub features: Var,
}

/// Plain-vector view of one turn's context features.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnContext {
    pub utterance: Vec<f64>,
    pub dialogue: Vec<f64>,
    pub acts: Option<Vec<f64>>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ContextEncoder {
    pub config: EncoderConfig,
    pub token_embed: ParamId,
    utterance_fwd: Lstm,
    utterance_bwd: Lstm,
    dialogue: Lstm,
    acts: Option<(ParamId, Lstm)>,
}

impl ContextEncoder {
    pub fn new(
        store: &mut ParamStore,
        config: &EncoderConfig,
        vocab_size: usize,
        act_vocab_size: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let c = config;
        let token_embed = store.add(
            "token_embed",
            uniform(rng, vocab_size, c.token_embed_dim, EMBED_INIT),
        );
        let utterance_fwd = Lstm::new(store, "utterance_fwd", c.token_embed_dim, c.utterance_hidden_dim, rng);
        let utterance_bwd = Lstm::new(store, "utterance_bwd", c.token_embed_dim, c.utterance_hidden_dim, rng);
        let dialogue = Lstm::new(store, "dialogue", c.utterance_dim(), c.dialogue_hidden_dim, rng);
        let acts = c.use_acts.then(|| {
            let table = store.add("act_embed", uniform(rng, act_vocab_size, c.act_embed_dim, EMBED_INIT));
            let lstm = Lstm::new(store, "acts", c.act_embed_dim, c.act_hidden_dim, rng);
            (table, lstm)
        });
        Self {
            config: config.clone(),
            token_embed,
            utterance_fwd,
            utterance_bwd,
            dialogue,
            acts,
        }
    }

    /// `E_i` for a batch of utterances: concatenated final backward and final
    /// forward states, one row per utterance. Utterances are clipped to
    /// `max_turn_tokens`; an empty utterance is encoded as a single padding
    /// token.
    pub fn encode_utterances(&self, g: &mut Graph, utterances: &[Vec<usize>]) -> Var {
        let max = self.config.max_turn_tokens;
        let seqs: Vec<Vec<usize>> = utterances
            .iter()
            .map(|u| {
                if u.is_empty() {
                    vec![PAD]
                } else {
                    u[..u.len().min(max)].to_vec()
                }
            })
            .collect();
        let reversed: Vec<Vec<usize>> = seqs
            .iter()
            .map(|s| s.iter().rev().copied().collect())
            .collect();
        let fwd = self.run_tokens(g, &self.utterance_fwd, &seqs);
        let bwd = self.run_tokens(g, &self.utterance_bwd, &reversed);
        g.concat(&[bwd, fwd])
    }

    fn run_tokens(&self, g: &mut Graph, lstm: &Lstm, seqs: &[Vec<usize>]) -> Var {
        let steps = seqs.iter().map(Vec::len).max().unwrap_or(0);
        let mut inputs = Vec::with_capacity(steps);
        let mut masks = Vec::with_capacity(steps);
        for t in 0..steps {
            let groups = seqs
                .iter()
                .map(|s| vec![s.get(t).copied().unwrap_or(PAD)])
                .collect();
            inputs.push(g.embed(self.token_embed, groups));
            masks.push(seqs.iter().map(|s| t < s.len()).collect());
        }
        let states = lstm.run(g, &inputs, Some(&masks), seqs.len());
        *states.last().expect("at least one step")
    }

    /// `Z_i` for every turn: the dialogue LSTM's state after `E_1..E_i`,
    /// restricted to the most recent `max_history_turns` utterances.
    pub fn encode_dialogue(&self, g: &mut Graph, utterance_rows: Var, turns: usize) -> Var {
        let rows: Vec<Var> = (0..turns).map(|t| g.select_rows(utterance_rows, vec![t])).collect();
        let states = windowed_states(g, &self.dialogue, &rows, self.config.max_history_turns);
        g.stack_rows(&states)
    }

    /// `A_i` for every turn: the act LSTM's state after the acts of all agent
    /// turns up to turn `i` (most recent `max_history_turns` agent turns). A
    /// turn with no preceding acts gets the zero initial state.
    pub fn encode_acts(&self, g: &mut Graph, acts: &[Vec<usize>]) -> Option<Var> {
        let (table, lstm) = self.acts.as_ref()?;
        let flat: Vec<usize> = acts.iter().flatten().copied().collect();
        let embedded = if flat.is_empty() {
            None
        } else {
            Some(g.embed(*table, flat.iter().map(|&a| vec![a]).collect()))
        };
        let h = self.config.max_history_turns;

        let mut ends = Vec::with_capacity(acts.len());
        let mut total = 0;
        for a in acts {
            total += a.len();
            ends.push(total);
        }
        let step_inputs: Vec<Var> = match embedded {
            Some(e) => (0..flat.len()).map(|p| g.select_rows(e, vec![p])).collect(),
            None => Vec::new(),
        };
        let running_len = if acts.len() > h { ends[h - 1] } else { total };
        let running = lstm.run(g, &step_inputs[..running_len], None, 1);

        let mut rows = Vec::with_capacity(acts.len());
        for i in 0..acts.len() {
            let row = if i < h {
                match ends[i] {
                    0 => g.zeros(1, lstm.hidden),
                    end => running[end - 1],
                }
            } else {
                let start = ends[i - h];
                if start == ends[i] {
                    g.zeros(1, lstm.hidden)
                } else {
                    *lstm.run(g, &step_inputs[start..ends[i]], None, 1).last().unwrap()
                }
            };
            rows.push(row);
        }
        Some(g.stack_rows(&rows))
    }

    /// Encodes every turn of a dialogue and concatenates `[E; Z; A]`.
    pub fn encode(&self, g: &mut Graph, input: &DialogueInput) -> EncodedContext {
        let turns = input.num_turns();
        let utterances = self.encode_utterances(g, &input.utterances);
        let dialogue = self.encode_dialogue(g, utterances, turns);
        let acts = self.encode_acts(g, &input.acts);
        let features = match acts {
            Some(a) => g.concat(&[utterances, dialogue, a]),
            None => g.concat(&[utterances, dialogue]),
        };
        EncodedContext {
            utterances,
            dialogue,
            acts,
            features,
        }
    }

    /// Per-turn context vectors, computed without recording gradients.
    pub fn turn_contexts(&self, params: &ParamStore, input: &DialogueInput) -> Vec<TurnContext> {
        let mut g = Graph::new(params);
        let enc = self.encode(&mut g, input);
        let row = |g: &Graph, v: Var, t: usize| g.value(v).row(t).to_vec();
        (0..input.num_turns())
            .map(|t| TurnContext {
                utterance: row(&g, enc.utterances, t),
                dialogue: row(&g, enc.dialogue, t),
                acts: enc.acts.map(|a| row(&g, a, t)),
                features: row(&g, enc.features, t),
            })
            .collect()
    }

    /// `E_i` of a single utterance.
    pub fn encode_utterance(&self, params: &ParamStore, tokens: &[usize]) -> Vec<f64> {
        let mut g = Graph::new(params);
        let e = self.encode_utterances(&mut g, &[tokens.to_vec()]);
        g.value(e).row(0).to_vec()
    }

    /// `Z_i` for the last of a sequence of utterance vectors.
    pub fn encode_dialogue_vectors(&self, params: &ParamStore, utterances: &[Vec<f64>]) -> Vec<f64> {
        let mut g = Graph::new(params);
        let width = self.config.utterance_dim();
        let flat: Vec<f64> = utterances.iter().flatten().copied().collect();
        let rows = g.constant(Tensor::from_shape_vec((utterances.len(), width), flat).expect("utterance width"));
        let z = self.encode_dialogue(&mut g, rows, utterances.len());
        g.value(z).row(utterances.len() - 1).to_vec()
    }

    /// `A_i` after the given act sequence; `None` when acts are disabled.
    pub fn encode_act_sequence(&self, params: &ParamStore, acts: &[usize]) -> Option<Vec<f64>> {
        let mut g = Graph::new(params);
        let a = self.encode_acts(&mut g, &[acts.to_vec()])?;
        Some(g.value(a).row(0).to_vec())
    }
}

/// State after each prefix of `inputs`, where turn `i` only sees the last
/// `window` inputs ending at `i`.
fn windowed_states(g: &mut Graph, lstm: &Lstm, inputs: &[Var], window: usize) -> Vec<Var> {
    let mut out = lstm.run(g, &inputs[..inputs.len().min(window)], None, 1);
    for i in window..inputs.len() {
        let states = lstm.run(g, &inputs[i + 1 - window..=i], None, 1);
        out.push(*states.last().expect("non-empty window"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(use_acts: bool) -> EncoderConfig {
        EncoderConfig {
            token_embed_dim: 4,
            utterance_hidden_dim: 3,
            dialogue_hidden_dim: 5,
            act_embed_dim: 2,
            act_hidden_dim: 3,
            context_ff_dim: 4,
            max_turn_tokens: 30,
            max_history_turns: 30,
            use_acts,
        }
    }

    fn encoder(config: &EncoderConfig, seed: u64) -> (ParamStore, ContextEncoder) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = ContextEncoder::new(&mut store, config, 20, 6, &mut rng);
        (store, enc)
    }

    #[test]
    fn full_scale_dimensions() {
        let ov = EncoderConfig::ov();
        assert_eq!(ov.utterance_dim(), 512);
        assert_eq!(ov.dialogue_hidden_dim, 512);
        assert_eq!(ov.act_hidden_dim, 64);
        assert_eq!(ov.context_dim(), 512 + 512 + 64);
        assert_eq!(EncoderConfig::jst().dialogue_hidden_dim, 150);
        assert_eq!(EncoderConfig::jst().context_dim(), 400 + 150);
        assert!(EncoderConfig::ov().validate().is_ok());
        let mut bad = EncoderConfig::ov();
        bad.act_hidden_dim = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn output_widths_do_not_depend_on_length() {
        let config = tiny(true);
        let (store, enc) = encoder(&config, 1);
        for tokens in [vec![], vec![2], vec![2, 3, 4, 5, 6, 7]] {
            assert_eq!(enc.encode_utterance(&store, &tokens).len(), 6);
        }
        let input = DialogueInput {
            utterances: vec![vec![2, 3], vec![], vec![4, 5, 6]],
            acts: vec![vec![], vec![2, 3], vec![4]],
        };
        let ctx = enc.turn_contexts(&store, &input);
        assert_eq!(ctx.len(), 3);
        for c in &ctx {
            assert_eq!(c.features.len(), config.context_dim());
            assert_eq!(c.features.len(), c.utterance.len() + c.dialogue.len() + 3);
            assert!(c.features.iter().all(|x| x.is_finite()));
        }
        // no acts before the first turn
        assert!(ctx[0].acts.as_ref().unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_weights_give_zero_vectors() {
        let config = tiny(true);
        let (mut store, enc) = encoder(&config, 2);
        for t in store.tensors_mut() {
            t.fill(0.0);
        }
        let input = DialogueInput {
            utterances: vec![vec![2, 3], vec![5]],
            acts: vec![vec![], vec![1]],
        };
        for c in enc.turn_contexts(&store, &input) {
            assert!(c.features.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn batched_utterances_match_single_encoding() {
        let (store, enc) = encoder(&tiny(false), 3);
        let utts = vec![vec![2, 3, 4], vec![5], vec![], vec![6, 7]];
        let mut g = Graph::new(&store);
        let batched = enc.encode_utterances(&mut g, &utts);
        for (i, u) in utts.iter().enumerate() {
            let single = enc.encode_utterance(&store, u);
            for (a, b) in g.value(batched).row(i).iter().zip(&single) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_turn_depends_only_on_first_utterance() {
        let (store, enc) = encoder(&tiny(false), 4);
        let a = DialogueInput {
            utterances: vec![vec![2, 3], vec![4]],
            acts: vec![vec![], vec![]],
        };
        let mut b = a.clone();
        b.utterances[1] = vec![9, 9, 9];
        assert_eq!(enc.turn_contexts(&store, &a)[0], enc.turn_contexts(&store, &b)[0]);
        assert_ne!(enc.turn_contexts(&store, &a)[1], enc.turn_contexts(&store, &b)[1]);
    }

    #[test]
    fn long_utterances_encode_as_their_clipped_prefix() {
        let (store, enc) = encoder(&tiny(false), 5);
        let long: Vec<usize> = (0..100).map(|i| 2 + i % 17).collect();
        assert_eq!(
            enc.encode_utterance(&store, &long),
            enc.encode_utterance(&store, &long[..30])
        );
    }

    #[test]
    fn long_dialogues_keep_the_last_window() {
        let (store, enc) = encoder(&tiny(true), 6);
        let turns = 60;
        let full = DialogueInput {
            utterances: (0..turns).map(|i| vec![2 + i % 11, 3 + i % 5]).collect(),
            acts: (0..turns).map(|i| if i == 0 { vec![] } else { vec![2 + i % 4] }).collect(),
        };
        let last30 = DialogueInput {
            utterances: full.utterances[turns - 30..].to_vec(),
            acts: full.acts[turns - 30..].to_vec(),
        };
        let a = enc.turn_contexts(&store, &full);
        let b = enc.turn_contexts(&store, &last30);
        assert_eq!(a.last(), b.last());
        // turns inside the first window use the running state
        let c = enc.turn_contexts(&store, &DialogueInput {
            utterances: full.utterances[..31].to_vec(),
            acts: full.acts[..31].to_vec(),
        });
        assert_eq!(c[29], a[29]);
    }

    #[test]
    fn act_encoder_disabled_for_joint_config() {
        let (store, enc) = encoder(&tiny(false), 7);
        assert!(enc.encode_act_sequence(&store, &[2, 3]).is_none());
        let (store, enc) = encoder(&tiny(true), 7);
        assert_eq!(enc.encode_act_sequence(&store, &[2, 3]).unwrap().len(), 3);
        assert!(enc.encode_act_sequence(&store, &[]).unwrap().iter().all(|&x| x == 0.0));
        let z = enc.encode_dialogue_vectors(&store, &[vec![0.1; 6], vec![0.2; 6]]);
        assert_eq!(z.len(), 5);
    }
}
