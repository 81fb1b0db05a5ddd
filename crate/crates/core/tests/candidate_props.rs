mod common;

use std::collections::BTreeSet;

use common::{brute_force_candidates, corpus, dialogue};
use hyst_core::candidates::{
    build_candidate_set, dialogue_candidate_sets, global_value_set, label_candidates, reachability_report,
    SENTINEL_CANDIDATES,
};
use hyst_core::ontology::build_ontology;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn candidate_sets_equal_brute_force_enumeration(
        train in corpus(4, 6, true),
        d in dialogue(6, true),
        max_n in 1usize..=8,
    ) {
        let values = global_value_set(&train);
        let sets = dialogue_candidate_sets(&d, &values, max_n);
        prop_assert_eq!(sets.len(), d.num_user_turns());
        for i in 1..=d.num_user_turns() {
            let set = build_candidate_set(&d, i, &values, max_n);
            prop_assert_eq!(&set, &sets[i - 1]);
            prop_assert_eq!(set.turn_index, i);
            let n = set.candidates.len();
            prop_assert!(n >= 3);
            prop_assert_eq!(&set.candidates[n - 3..], &SENTINEL_CANDIDATES.map(String::from)[..]);
            let mined: Vec<&String> = set.candidates[..n - 3].iter().collect();
            let distinct: BTreeSet<String> = mined.iter().map(|s| s.to_string()).collect();
            prop_assert_eq!(distinct.len(), mined.len(), "duplicate candidates");
            prop_assert_eq!(distinct, brute_force_candidates(&d, i, &values, max_n));
        }
    }

    #[test]
    fn candidates_only_grow_within_a_dialogue(train in corpus(3, 5, true), d in dialogue(6, true)) {
        let values = global_value_set(&train);
        let sets = dialogue_candidate_sets(&d, &values, 8);
        for pair in sets.windows(2) {
            for c in &pair[0].candidates {
                prop_assert!(pair[1].contains(c), "{c:?} vanished between turns");
            }
            // Earlier candidates keep their positions.
            prop_assert_eq!(&pair[1].candidates[..pair[0].len() - 3], &pair[0].candidates[..pair[0].len() - 3]);
        }
    }

    #[test]
    fn positive_labels_point_at_gold_values_in_the_set(train in corpus(3, 5, true), d in dialogue(6, true)) {
        let values = global_value_set(&train);
        let sets = dialogue_candidate_sets(&d, &values, 8);
        for (set, gold) in sets.iter().zip(d.gold_states()) {
            let labels = label_candidates(set, gold);
            prop_assert_eq!(labels.n_candidates(), set.len());
            for &(j, k) in labels.positives() {
                prop_assert!(j < set.len());
                prop_assert_eq!(set.candidates[j].as_str(), gold.get(k));
            }
            for (k, v) in gold.set_slots() {
                prop_assert_eq!(set.contains(v), labels.positives().iter().any(|&(_, kk)| kk == k));
            }
        }
    }

    #[test]
    fn shorter_ngrams_never_lower_the_unreachable_rate(train in corpus(4, 5, true), dev in corpus(4, 6, true)) {
        let values = global_value_set(&train);
        let ontology = build_ontology(&train);
        let mut previous: Option<f64> = None;
        for max_n in (1..=8).rev() {
            let r = reachability_report(&dev, &values, &ontology, max_n);
            if let Some(p) = previous {
                prop_assert!(r.ov_unreachable_rate >= p, "max_n {max_n}: {} < {p}", r.ov_unreachable_rate);
            }
            prop_assert!((r.ov_ceiling + r.ov_unreachable_rate - 100.0).abs() < 1e-9);
            previous = Some(r.ov_unreachable_rate);
        }
    }
}
