use std::fs;
use std::path::Path;

use hyst_core::corpus::{in_subsample, load_splits, Speaker, Split};
use hyst_core::ontology::build_ontology;
use hyst_core::slots::NUM_SLOTS;
use hyst_core::stats::{corpus_stats, slot_stats};
use hyst_core::synthetic::{write_synthetic, SyntheticConfig};
use proptest::prelude::*;
use serde_json::{json, Value};

fn synthetic(n_dialogues: usize, seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic(dir.path(), &SyntheticConfig { n_dialogues, seed }).unwrap();
    dir
}

/// Rewrites every dev and test dialogue so that each belief snapshot carries
/// a hotel area and hotel people value never seen anywhere else.
fn mutate_held_out(dir: &Path, tag: u64) {
    let path = dir.join("data.json");
    let mut data: serde_json::Map<String, Value> = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let mut held_out = Vec::new();
    for list in ["valListFile.json", "testListFile.json"] {
        held_out.extend(fs::read_to_string(dir.join(list)).unwrap().lines().map(str::to_string));
    }
    for id in held_out.iter().filter(|id| !id.is_empty()) {
        let log = data[id]["log"].as_array_mut().unwrap();
        for (i, turn) in log.iter_mut().enumerate().filter(|(i, _)| i % 2 == 1) {
            turn["metadata"]["hotel"] = json!({
                "semi": { "area": format!("mutant area {tag} {i}") },
                "book": { "booked": [], "people": format!("{}", 90 + i) },
            });
        }
    }
    fs::write(&path, serde_json::to_vec(&data).unwrap()).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_user_turn_has_a_total_gold_state(n in 10usize..60, seed in 0u64..1000) {
        let dir = synthetic(n, seed);
        let splits = load_splits(dir.path()).unwrap();
        prop_assert_eq!(splits.train.len() + splits.dev.len() + splits.test.len(), n);
        for split in [Split::Train, Split::Dev, Split::Test] {
            for d in splits.get(split) {
                prop_assert!(d.num_user_turns() >= 1);
                prop_assert_eq!(d.turns[0].speaker, Speaker::User);
                for t in &d.turns {
                    prop_assert_eq!(t.gold_state.is_some(), t.speaker == Speaker::User);
                }
                for g in d.gold_states() {
                    prop_assert_eq!(g.values().len(), NUM_SLOTS);
                    prop_assert!(g.values().iter().all(|v| !v.is_empty()));
                }
            }
        }
    }

    #[test]
    fn loading_and_statistics_are_deterministic(n in 10usize..60, seed in 0u64..1000) {
        let dir = synthetic(n, seed);
        let a = load_splits(dir.path()).unwrap();
        let b = load_splits(dir.path()).unwrap();
        prop_assert_eq!(&a.train, &b.train);
        prop_assert_eq!(&a.dev, &b.dev);
        prop_assert_eq!(&a.test, &b.test);
        for split in [Split::Train, Split::Dev, Split::Test] {
            prop_assert_eq!(corpus_stats(a.get(split)), corpus_stats(b.get(split)));
        }
        let onto_a = build_ontology(&a.train);
        let onto_b = build_ontology(&b.train);
        prop_assert_eq!(slot_stats(&a.train, &a.dev, &onto_a), slot_stats(&b.train, &b.dev, &onto_b));
    }

    #[test]
    fn ontology_ignores_held_out_dialogues(n in 20usize..60, seed in 0u64..1000, tag in 0u64..1000) {
        let dir = synthetic(n, seed);
        let before = load_splits(dir.path()).unwrap();
        mutate_held_out(dir.path(), tag);
        let after = load_splits(dir.path()).unwrap();

        let mutant = format!("mutant area {tag}");
        let seen_mutant = after
            .dev
            .iter()
            .chain(&after.test)
            .flat_map(|d| d.gold_states())
            .any(|g| g.values().iter().any(|v| v.starts_with(&mutant)));
        prop_assert!(seen_mutant, "mutation did not reach the loaded gold states");
        prop_assert_eq!(&before.train, &after.train);
        prop_assert_eq!(build_ontology(&before.train), build_ontology(&after.train));
    }

    #[test]
    fn subsamples_are_nested(ids in prop::collection::vec("[A-Z]{3}[0-9]{4}\\.json", 1..200), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        for id in &ids {
            if in_subsample(id, lo) {
                prop_assert!(in_subsample(id, hi));
            }
            prop_assert!(in_subsample(id, 1.0));
        }
    }
}
