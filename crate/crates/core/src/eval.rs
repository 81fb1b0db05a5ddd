//! Joint goal accuracy, per-domain and per-slot breakdowns, and report
//! rendering.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::candidates::ReachabilityReport;
use crate::corpus::Dialogue;
use crate::error::AlignmentError;
use crate::hybrid::HybridAssignment;
use crate::predictions::Predictions;
use crate::slots::{domain_slots, slot_keys, SlotKey, DOMAINS, NUM_SLOTS};
use crate::state::DialogueState;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

fn joint_over(pairs: &[(&DialogueState, &DialogueState)], subset: &[usize]) -> f64 {
    let hits = pairs.iter().filter(|(g, p)| p.matches_on(g, subset)).count();
    fraction(hits, pairs.len())
}

/// Fraction of gold user turns whose predicted value equals the gold value on
/// every slot of `subset`.
pub fn joint_goal_accuracy(
    preds: &Predictions,
    gold: &[Dialogue],
    subset: &[usize],
) -> Result<f64, AlignmentError> {
    Ok(joint_over(&preds.align(gold)?, subset))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAccuracy {
    pub domain: String,
    pub joint_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAccuracy {
    pub slot: SlotKey,
    pub accuracy: f64,
}

/// Joint accuracy over each domain's slots, counting every turn.
pub fn domain_report(preds: &Predictions, gold: &[Dialogue]) -> Result<Vec<DomainAccuracy>, AlignmentError> {
    let pairs = preds.align(gold)?;
    Ok(domain_rows(&pairs))
}

fn domain_rows(pairs: &[(&DialogueState, &DialogueState)]) -> Vec<DomainAccuracy> {
    DOMAINS
        .iter()
        .map(|d| DomainAccuracy {
            domain: d.to_string(),
            joint_accuracy: joint_over(pairs, &domain_slots(d)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub n_turns_evaluated: usize,
    pub overall_joint_accuracy: f64,
    pub per_domain_joint: Vec<DomainAccuracy>,
    pub per_slot_accuracy: Vec<SlotAccuracy>,
}

pub fn evaluate(name: &str, preds: &Predictions, gold: &[Dialogue]) -> Result<EvalReport, AlignmentError> {
    let pairs = preds.align(gold)?;
    let all: Vec<usize> = (0..NUM_SLOTS).collect();
    let per_slot_accuracy = slot_keys()
        .into_iter()
        .enumerate()
        .map(|(k, slot)| SlotAccuracy {
            slot,
            accuracy: joint_over(&pairs, &[k]),
        })
        .collect();
    Ok(EvalReport {
        name: name.to_string(),
        n_turns_evaluated: pairs.len(),
        overall_joint_accuracy: joint_over(&pairs, &all),
        per_domain_joint: domain_rows(&pairs),
        per_slot_accuracy,
    })
}

/// Everything rendered into the final report files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub split: String,
    pub systems: Vec<EvalReport>,
    pub hybrid_assignment: Option<HybridAssignment>,
    pub reachability: Option<ReachabilityReport>,
}

impl ReportBundle {
    pub fn new(split: &str) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            split: split.to_string(),
            systems: Vec::new(),
            hybrid_assignment: None,
            reachability: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let pct = |x: f64| format!("{:.2}", 100.0 * x);
        let width = self.systems.iter().map(|s| s.name.len()).max().unwrap_or(6).max(6);

        writeln!(out, "Joint goal accuracy ({} split)", self.split).unwrap();
        writeln!(out, "{:<width$}  {:>8}  {:>7}", "system", "joint %", "turns").unwrap();
        for s in &self.systems {
            writeln!(out, "{:<width$}  {:>8}  {:>7}", s.name, pct(s.overall_joint_accuracy), s.n_turns_evaluated).unwrap();
        }

        if !self.systems.is_empty() {
            writeln!(out, "\nPer-domain joint accuracy %").unwrap();
            write!(out, "{:<12}", "domain").unwrap();
            for s in &self.systems {
                write!(out, "  {:>width$}", s.name).unwrap();
            }
            out.push('\n');
            for (i, d) in DOMAINS.iter().enumerate() {
                write!(out, "{d:<12}").unwrap();
                for s in &self.systems {
                    write!(out, "  {:>width$}", pct(s.per_domain_joint[i].joint_accuracy)).unwrap();
                }
                out.push('\n');
            }

            writeln!(out, "\nPer-slot accuracy %").unwrap();
            write!(out, "{:<28}", "slot").unwrap();
            for s in &self.systems {
                write!(out, "  {:>width$}", s.name).unwrap();
            }
            if self.hybrid_assignment.is_some() {
                write!(out, "  {:>6}", "method").unwrap();
            }
            out.push('\n');
            for (k, key) in slot_keys().iter().enumerate() {
                write!(out, "{:<28}", key.to_string()).unwrap();
                for s in &self.systems {
                    write!(out, "  {:>width$}", pct(s.per_slot_accuracy[k].accuracy)).unwrap();
                }
                if let Some(a) = &self.hybrid_assignment {
                    write!(out, "  {:>6}", a.method(k).as_str()).unwrap();
                }
                out.push('\n');
            }
        }

        if let Some(r) = &self.reachability {
            writeln!(out, "\nReachability ({} turns, n-grams up to {})", r.n_turns, r.max_ngram).unwrap();
            writeln!(out, "{:<8}  {:>14}  {:>9}", "method", "unreachable %", "ceiling %").unwrap();
            writeln!(out, "{:<8}  {:>14.2}  {:>9.2}", "OVST", r.ov_unreachable_rate, r.ov_ceiling).unwrap();
            writeln!(out, "{:<8}  {:>14.2}  {:>9.2}", "JST", r.jst_unreachable_rate, r.jst_ceiling).unwrap();
        }
        out
    }
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn emit_report(bundle: &ReportBundle, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), bundle.to_json())?;
    fs::write(dir.join("report.txt"), bundle.to_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Turn;
    use crate::slots::slot_index;

    fn gold_corpus() -> Vec<Dialogue> {
        let area = slot_index("hotel", "area").unwrap();
        let mut turns = Vec::new();
        for i in 0..4 {
            let mut s = DialogueState::all_none();
            if i > 0 {
                s.set(area, "east");
            }
            turns.push(Turn::user("x", s));
            turns.push(Turn::agent("y", vec![]));
        }
        turns.pop();
        vec![Dialogue { id: "G".into(), turns }]
    }

    #[test]
    fn gold_scores_one_everywhere() {
        let gold = gold_corpus();
        let r = evaluate("gold", &Predictions::from_gold(&gold), &gold).unwrap();
        assert_eq!(r.overall_joint_accuracy, 1.0);
        assert!(r.per_domain_joint.iter().all(|d| d.joint_accuracy == 1.0));
        assert_eq!(r.per_slot_accuracy.len(), 37);
        assert_eq!(r.n_turns_evaluated, 4);
    }

    #[test]
    fn one_wrong_turn_of_four() {
        let gold = gold_corpus();
        let mut p = Predictions::from_gold(&gold);
        let mut s = p.get("G", 3).unwrap().clone();
        s.set(slot_index("taxi", "leaveAt").unwrap(), "12:00");
        p.insert("G", 3, s);
        let all: Vec<usize> = (0..37).collect();
        assert_eq!(joint_goal_accuracy(&p, &gold, &all).unwrap(), 0.75);
        let domains = domain_report(&p, &gold).unwrap();
        let taxi = domains.iter().find(|d| d.domain == "taxi").unwrap();
        assert_eq!(taxi.joint_accuracy, 0.75);
        assert!(domains.iter().filter(|d| d.domain != "taxi").all(|d| d.joint_accuracy == 1.0));
    }

    #[test]
    fn all_none_matches_gold_none_fraction() {
        let gold = gold_corpus();
        let r = evaluate("none", &Predictions::all_none(&gold), &gold).unwrap();
        assert_eq!(r.overall_joint_accuracy, 0.25);
    }

    #[test]
    fn missing_prediction_is_an_error() {
        let gold = gold_corpus();
        assert!(joint_goal_accuracy(&Predictions::new(), &gold, &[0]).is_err());
    }

    #[test]
    fn report_rendering_is_deterministic() {
        let gold = gold_corpus();
        let mut bundle = ReportBundle::new("test");
        bundle.systems.push(evaluate("HyST", &Predictions::from_gold(&gold), &gold).unwrap());
        let dir = tempfile::tempdir().unwrap();
        emit_report(&bundle, dir.path()).unwrap();
        let first = fs::read(dir.path().join("report.json")).unwrap();
        emit_report(&bundle, dir.path()).unwrap();
        assert_eq!(first, fs::read(dir.path().join("report.json")).unwrap());
        let text = bundle.to_text();
        assert!(text.contains("HyST"));
        assert_eq!(text.lines().filter(|l| l.contains('.') && l.contains("100.00")).count(), 1 + 7 + 37);
        let back: ReportBundle = serde_json::from_slice(&first).unwrap();
        assert_eq!(back, bundle);
    }
}
