//! Strategies, brute-force oracles and toy models shared by the property
//! suites and the acceptance summary.

#![allow(dead_code)]

use std::collections::BTreeSet;

use hyst_core::corpus::{Dialogue, Turn};
use hyst_core::jst::{JstConfig, JstModel, JstSpec};
use hyst_core::nn::encoder::EncoderConfig;
use hyst_core::nn::train::{batch_gradient, mean_loss, Trainable};
use hyst_core::ov::{OvConfig, OvModel, OvSpec};
use hyst_core::predictions::Predictions;
use hyst_core::slots::{slot_index, NUM_SLOTS};
use hyst_core::state::DialogueState;
use proptest::prelude::*;
use proptest::sample::select;

/// Words the generated utterances are drawn from.
pub const WORDS: [&str; 20] = [
    "i", "need", "a", "hotel", "in", "the", "east", "west", "cheap", "guest", "house", "acorn", "at", "12:30",
    "yes", "no", "please", "centre", "north", "parking",
];

/// Values the generated states are drawn from. `expensive` and `south`
/// never occur in any utterance, so they are always unreachable.
pub const VALUES: [&str; 12] = [
    "east",
    "west",
    "cheap",
    "acorn guest house",
    "guest house",
    "12:30",
    "centre",
    "yes",
    "no",
    "dontcare",
    "expensive",
    "south",
];

pub const ACTS: [&str; 4] = ["Hotel-Inform(Area)", "Hotel-Request(Price)", "general-greet(none)", "Taxi-Request(Leave)"];

/// Slots the generated states touch.
pub fn touched_slots() -> [usize; 6] {
    [
        slot_index("hotel", "area").unwrap(),
        slot_index("hotel", "pricerange").unwrap(),
        slot_index("hotel", "name").unwrap(),
        slot_index("hotel", "parking").unwrap(),
        slot_index("taxi", "leaveAt").unwrap(),
        slot_index("restaurant", "area").unwrap(),
    ]
}

pub fn utterance(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(select(&WORDS[..]), 0..=max_len).prop_map(|w| w.join(" "))
}

/// One state update: slot position in [`touched_slots`] and a value index,
/// where `VALUES.len()` means reset to `none`.
type Update = (usize, usize);

/// Raw material of one user turn and the agent reply that follows it.
#[derive(Debug, Clone)]
pub struct TurnSpec {
    user: String,
    agent: String,
    acts: Vec<String>,
    updates: Vec<Update>,
}

fn turn_spec(allow_reverts: bool) -> impl Strategy<Value = TurnSpec> {
    let value_range = if allow_reverts { VALUES.len() + 1 } else { VALUES.len() };
    (
        utterance(10),
        utterance(8),
        prop::collection::vec(select(&ACTS[..]).prop_map(str::to_string), 0..3),
        prop::collection::vec((0..6usize, 0..value_range), 0..3),
    )
        .prop_map(|(user, agent, acts, updates)| TurnSpec {
            user,
            agent,
            acts,
            updates,
        })
}

/// Builds a dialogue `u_1, a_1, ..., u_n` with cumulative gold states.
pub fn build_dialogue(id: &str, specs: &[TurnSpec]) -> Dialogue {
    let slots = touched_slots();
    let mut state = DialogueState::all_none();
    let mut turns = Vec::new();
    for (t, spec) in specs.iter().enumerate() {
        if t > 0 {
            turns.push(Turn::agent(&specs[t - 1].agent, specs[t - 1].acts.clone()));
        }
        for &(s, v) in &spec.updates {
            state.set(slots[s], VALUES.get(v).copied().unwrap_or("none"));
        }
        turns.push(Turn::user(&spec.user, state.clone()));
    }
    Dialogue {
        id: id.to_string(),
        turns,
    }
}

/// A dialogue of `1..=max_user_turns` user turns. Without reverts, a slot
/// never returns to `none` once set.
pub fn dialogue(max_user_turns: usize, allow_reverts: bool) -> impl Strategy<Value = Dialogue> {
    prop::collection::vec(turn_spec(allow_reverts), 1..=max_user_turns).prop_map(|specs| build_dialogue("d", &specs))
}

/// A corpus of distinct dialogue ids.
pub fn corpus(max_dialogues: usize, max_user_turns: usize, allow_reverts: bool) -> impl Strategy<Value = Vec<Dialogue>> {
    prop::collection::vec(dialogue(max_user_turns, allow_reverts), 1..=max_dialogues).prop_map(|ds| {
        ds.into_iter()
            .enumerate()
            .map(|(i, mut d)| {
                d.id = format!("D{i:03}");
                d
            })
            .collect()
    })
}

/// A prediction set covering every turn of `gold`, each slot copied from
/// gold or replaced by another value, as chosen by `noise`.
pub fn perturbed(gold: &[Dialogue], noise: &[u8]) -> Predictions {
    let mut p = Predictions::new();
    let mut n = 0usize;
    for d in gold {
        let states = d
            .gold_states()
            .map(|g| {
                let mut s = g.clone();
                for k in touched_slots() {
                    let r = noise[n % noise.len()];
                    n += 1;
                    if r % 3 == 0 {
                        s.set(k, VALUES[r as usize % VALUES.len()]);
                    }
                }
                s
            })
            .collect();
        p.insert_dialogue(&d.id, states);
    }
    p
}

/// Every n-gram (within one utterance) of the first `i` user turns and the
/// agent turns between them, kept when it is a training value. Enumerates
/// start and length exhaustively, with no deduplication or ordering.
pub fn brute_force_candidates(d: &Dialogue, i: usize, values: &BTreeSet<String>, max_n: usize) -> BTreeSet<String> {
    let mut users_seen = 0;
    let mut out = BTreeSet::new();
    for turn in &d.turns {
        if users_seen == i {
            break;
        }
        if turn.gold_state.is_some() {
            users_seen += 1;
        }
        let toks = &turn.tokens;
        for start in 0..toks.len() {
            for len in 1..=max_n {
                if start + len > toks.len() {
                    continue;
                }
                let gram = toks[start..start + len].join(" ");
                if values.contains(&gram) && !["yes", "no", "dontcare"].contains(&gram.as_str()) {
                    out.insert(gram);
                }
            }
        }
    }
    out
}

/// Tiny dimensions for gradient and property checks.
pub fn tiny_encoder(use_acts: bool) -> EncoderConfig {
    EncoderConfig {
        token_embed_dim: 4,
        utterance_hidden_dim: 3,
        dialogue_hidden_dim: 3,
        act_embed_dim: 2,
        act_hidden_dim: 2,
        context_ff_dim: 4,
        max_turn_tokens: 30,
        max_history_turns: 30,
        use_acts,
    }
}

pub fn tiny_ov(train: &[Dialogue], seed: u64) -> OvModel {
    OvModel::new(OvSpec::from_train(
        train,
        OvConfig {
            encoder: tiny_encoder(true),
            ..Default::default()
        },
        seed,
    ))
}

pub fn tiny_jst(train: &[Dialogue], seed: u64) -> JstModel {
    JstModel::new(JstSpec::from_train(
        train,
        JstConfig {
            encoder: tiny_encoder(false),
        },
        seed,
    ))
}

/// Step for the central differences.
pub const FD_STEP: f64 = 1e-3;
/// Largest accepted relative disagreement between analytic and numeric
/// gradients.
pub const GRAD_REL_TOL: f64 = 1e-4;
/// Gradients smaller than this in magnitude are not compared relatively,
/// since round-off in the finite difference dominates below it.
pub const GRAD_ABS_FLOOR: f64 = 1e-7;

/// Compares the analytic gradient of `example`'s loss with five-point central
/// finite differences at the given (parameter, entry) picks, each reduced
/// modulo the parameter count and size. Returns the worst relative error.
pub fn gradient_check<M: Trainable>(model: &mut M, example: &M::Example, picks: &[(usize, usize)]) -> Result<f64, String> {
    let (_, grads) = batch_gradient(model, &[example]);
    let mut worst = 0.0f64;
    for &(p, e) in picks {
        let p = p % model.params().len();
        let (rows, cols) = model.params().tensors()[p].dim();
        let (r, c) = ((e / cols) % rows, e % cols);
        let analytic = grads.tensors()[p][[r, c]];

        let original = model.params().tensors()[p][[r, c]];
        let mut loss_at = |offset: f64| {
            model.params_mut().tensors_mut()[p][[r, c]] = original + offset;
            mean_loss(model, std::slice::from_ref(example))
        };
        let h = FD_STEP;
        let numeric = (8.0 * (loss_at(h) - loss_at(-h)) - (loss_at(2.0 * h) - loss_at(-2.0 * h))) / (12.0 * h);
        model.params_mut().tensors_mut()[p][[r, c]] = original;

        let scale = analytic.abs().max(numeric.abs());
        let err = if scale < GRAD_ABS_FLOOR {
            0.0
        } else {
            (analytic - numeric).abs() / scale
        };
        if err > GRAD_REL_TOL {
            return Err(format!(
                "{} [{r},{c}]: analytic {analytic:e} vs numeric {numeric:e} (relative error {err:e})",
                model.params().names()[p]
            ));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Fraction of turns whose prediction matches gold on all slots, computed
/// directly from the two state lists.
pub fn joint_fraction(gold: &[Dialogue], preds: &Predictions) -> f64 {
    let mut hits = 0usize;
    let mut n = 0usize;
    for d in gold {
        for (i, g) in d.gold_states().enumerate() {
            n += 1;
            let p = preds.get(&d.id, i + 1).expect("prediction for every turn");
            hits += usize::from((0..NUM_SLOTS).all(|k| g.get(k) == p.get(k)));
        }
    }
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}
