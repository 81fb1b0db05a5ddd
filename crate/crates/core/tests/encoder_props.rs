mod common;

use common::{corpus, gradient_check, tiny_encoder, tiny_jst, tiny_ov};
use hyst_core::corpus::{Dialogue, Turn};
use hyst_core::nn::encoder::{ContextEncoder, DialogueInput};
use hyst_core::nn::ParamStore;
use hyst_core::state::DialogueState;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 40;
const ACT_VOCAB: usize = 9;

fn encoder(seed: u64) -> (ContextEncoder, ParamStore) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = ContextEncoder::new(&mut store, &tiny_encoder(true), VOCAB, ACT_VOCAB, &mut rng);
    (enc, store)
}

fn ids(max: usize, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2..max, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn long_utterances_encode_as_their_first_thirty_tokens(seed in 0u64..1000, tokens in ids(VOCAB, 31..=100)) {
        let (enc, store) = encoder(seed);
        let full = enc.encode_utterance(&store, &tokens);
        let clipped = enc.encode_utterance(&store, &tokens[..30]);
        prop_assert_eq!(full, clipped);
    }

    #[test]
    fn long_dialogues_encode_as_their_last_thirty_turns(
        seed in 0u64..1000,
        turns in prop::collection::vec((ids(VOCAB, 0..=5), ids(ACT_VOCAB, 0..=2)), 31..=60),
    ) {
        let (enc, store) = encoder(seed);
        let full = DialogueInput {
            utterances: turns.iter().map(|t| t.0.clone()).collect(),
            acts: turns.iter().map(|t| t.1.clone()).collect(),
        };
        let tail = turns.len() - 30;
        let suffix = DialogueInput {
            utterances: full.utterances[tail..].to_vec(),
            acts: full.acts[tail..].to_vec(),
        };
        let a = enc.turn_contexts(&store, &full);
        let b = enc.turn_contexts(&store, &suffix);
        prop_assert_eq!(&a.last().unwrap().features, &b.last().unwrap().features);
    }

    #[test]
    fn encoder_outputs_are_finite(seed in 0u64..1000, turns in prop::collection::vec((ids(VOCAB, 0..=40), ids(ACT_VOCAB, 0..=4)), 1..=35)) {
        let (enc, store) = encoder(seed);
        let input = DialogueInput {
            utterances: turns.iter().map(|t| t.0.clone()).collect(),
            acts: turns.iter().map(|t| t.1.clone()).collect(),
        };
        let ctx = enc.turn_contexts(&store, &input);
        prop_assert_eq!(ctx.len(), turns.len());
        for c in &ctx {
            prop_assert_eq!(c.features.len(), tiny_encoder(true).context_dim());
            prop_assert!(c.features.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn open_vocabulary_gradients_match_finite_differences(
        train in corpus(3, 4, true),
        seed in 0u64..1000,
        picks in prop::collection::vec((0usize..64, 0usize..4096), 24),
    ) {
        let mut model = tiny_ov(&train, seed);
        let examples = model.examples(&train);
        model.init_output_prior(&examples);
        let worst = gradient_check(&mut model, &examples[0], &picks);
        prop_assert!(worst.is_ok(), "{}", worst.unwrap_err());
    }

    #[test]
    fn joint_gradients_match_finite_differences(
        train in corpus(3, 4, true),
        seed in 0u64..1000,
        picks in prop::collection::vec((0usize..64, 0usize..4096), 24),
    ) {
        let mut model = tiny_jst(&train, seed);
        model.init_output_prior(&train);
        let examples = model.examples(&train);
        let worst = gradient_check(&mut model, &examples[0], &picks);
        prop_assert!(worst.is_ok(), "{}", worst.unwrap_err());
    }

    #[test]
    fn embedding_gradients_of_a_three_token_input_match(seed in 0u64..1000, a in 0usize..4, b in 0usize..4, c in 0usize..4) {
        let words = ["east", "cheap", "hotel", "north"];
        let mut state = DialogueState::all_none();
        state.set(hyst_core::slots::slot_index("hotel", "area").unwrap(), "east");
        let d = Dialogue {
            id: "toy".into(),
            turns: vec![Turn::user(&format!("{} {} {}", words[a], words[b], words[c]), state)],
        };
        let train = vec![d];
        let mut model = tiny_jst(&train, seed);
        let examples = model.examples(&train);
        let table = model.store.names().iter().position(|n| n == "token_embed").unwrap();
        let (rows, cols) = model.store.tensors()[table].dim();
        let picks: Vec<(usize, usize)> = (0..rows * cols).map(|e| (table, e)).collect();
        let worst = gradient_check(&mut model, &examples[0], &picks);
        prop_assert!(worst.is_ok(), "{}", worst.unwrap_err());
    }
}
