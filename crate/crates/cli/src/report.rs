//! Plain-text rendering of the corpus statistics.

use std::fmt::Write as _;

use hyst_core::corpus::Split;
use hyst_core::stats::{CorpusStats, SlotStatsRow};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsArtifact {
    pub corpus: Vec<(Split, CorpusStats)>,
    pub slots: Vec<SlotStatsRow>,
}

pub fn render_stats(stats: &StatsArtifact) -> String {
    let mut out = String::new();
    writeln!(out, "Corpus statistics").unwrap();
    writeln!(
        out,
        "{:<6}  {:>9}  {:>10}  {:>11}  {:>14}  {:>13}",
        "split", "dialogues", "user turns", "vocab (all)", "vocab (no num)", "median length"
    )
    .unwrap();
    for (split, s) in &stats.corpus {
        writeln!(
            out,
            "{:<6}  {:>9}  {:>10}  {:>11}  {:>14}  {:>13}",
            split.as_str(),
            s.n_dialogues,
            s.n_user_turns,
            s.user_vocab_with_numeric,
            s.user_vocab_without_numeric,
            s.median_user_turn_tokens
        )
        .unwrap();
    }

    writeln!(out, "\nPer-slot statistics (vocabulary from train, rates on dev)").unwrap();
    writeln!(out, "{:<28}  {:>10}  {:>7}  {:>10}", "slot", "vocab size", "none %", "JST OOV %").unwrap();
    for row in &stats.slots {
        writeln!(
            out,
            "{:<28}  {:>10}  {:>7.2}  {:>10.2}",
            row.slot.to_string(),
            row.vocab_size,
            row.pct_none,
            row.jst_oov_rate
        )
        .unwrap();
    }
    out
}
