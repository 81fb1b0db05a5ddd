//! MultiWOZ-2.0 ingestion into a canonical dialogue model.
//!
//! The distribution directory is expected to hold `data.json` (dialogue logs
//! with per-turn `metadata`), the split lists `valListFile.json` and
//! `testListFile.json` (one dialogue file name per line), and optionally
//! `dialogue_acts.json`. Training dialogues are everything not listed in the
//! dev or test lists.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CorpusError;
use crate::slots::MULTIWOZ_SLOTS;
use crate::state::DialogueState;
use crate::text::{canonical_value, tokenize};

pub const DATA_FILE: &str = "data.json";
pub const ACTS_FILE: &str = "dialogue_acts.json";
pub const DEV_LIST: &str = "valListFile.json";
pub const TEST_LIST: &str = "testListFile.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "val" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, dev or test)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    pub tokens: Vec<String>,
    /// Dialogue-act labels such as `Hotel-Request(Price)`; agent turns only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub acts: Vec<String>,
    /// Cumulative gold state after this turn; user turns only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_state: Option<DialogueState>,
}

impl Turn {
    pub fn user(text: &str, gold_state: DialogueState) -> Self {
        Self {
            speaker: Speaker::User,
            text: text.to_string(),
            tokens: tokenize(text),
            acts: Vec::new(),
            gold_state: Some(gold_state),
        }
    }

    pub fn agent(text: &str, acts: Vec<String>) -> Self {
        Self {
            speaker: Speaker::Agent,
            text: text.to_string(),
            tokens: tokenize(text),
            acts,
            gold_state: None,
        }
    }
}

/// A dialogue as an ordered turn list ending in a user turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Positions in `turns` of the user turns, in order.
    pub fn user_positions(&self) -> Vec<usize> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::User)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn num_user_turns(&self) -> usize {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .count()
    }

    /// The `i`-th user turn, 1-based.
    pub fn user_turn(&self, i: usize) -> Option<&Turn> {
        self.turns
            .iter()
            .filter(|t| t.speaker == Speaker::User)
            .nth(i.checked_sub(1)?)
    }

    /// Gold states of the user turns, in order.
    pub fn gold_states(&self) -> impl Iterator<Item = &DialogueState> {
        self.turns.iter().filter_map(|t| t.gold_state.as_ref())
    }

    /// Turns `a_1, u_1, ..., a_i, u_i`: everything up to and including the
    /// `i`-th user turn (1-based).
    pub fn prefix(&self, i: usize) -> &[Turn] {
        let positions = self.user_positions();
        match i.checked_sub(1).and_then(|j| positions.get(j)) {
            Some(&p) => &self.turns[..=p],
            None => &self.turns[..0],
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawDialogue {
    log: Vec<RawTurn>,
}

#[derive(Debug, Deserialize)]
struct RawTurn {
    text: String,
    #[serde(default)]
    metadata: Value,
    #[serde(default)]
    dialog_act: Option<Value>,
}

/// All three splits of one distribution directory.
#[derive(Debug, Clone, Default)]
pub struct SplitCorpora {
    pub train: Vec<Dialogue>,
    pub dev: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl SplitCorpora {
    pub fn get(&self, split: Split) -> &[Dialogue] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    /// Keeps only dialogues accepted by `keep`, in every split.
    pub fn filter(self, keep: impl Fn(&Dialogue) -> bool) -> Self {
        Self {
            train: self.train.into_iter().filter(|d| keep(d)).collect(),
            dev: self.dev.into_iter().filter(|d| keep(d)).collect(),
            test: self.test.into_iter().filter(|d| keep(d)).collect(),
        }
    }
}

/// Loads one split.
pub fn load_corpus(dir: &Path, split: Split) -> Result<Vec<Dialogue>, CorpusError> {
    let all = load_splits(dir)?;
    Ok(match split {
        Split::Train => all.train,
        Split::Dev => all.dev,
        Split::Test => all.test,
    })
}

/// Loads every split, sorted by dialogue id within each.
pub fn load_splits(dir: &Path) -> Result<SplitCorpora, CorpusError> {
    let dev_ids = read_split_list(&dir.join(DEV_LIST))?;
    let test_ids = read_split_list(&dir.join(TEST_LIST))?;

    let data_path = dir.join(DATA_FILE);
    let raw: BTreeMap<String, Value> = if data_path.exists() {
        read_json(&data_path)?
    } else {
        BTreeMap::new()
    };
    let acts_path = dir.join(ACTS_FILE);
    let acts: HashMap<String, Value> = if acts_path.exists() {
        read_json(&acts_path)?
    } else {
        HashMap::new()
    };

    for (ids, list) in [(&dev_ids, DEV_LIST), (&test_ids, TEST_LIST)] {
        if let Some(missing) = ids.iter().find(|id| !raw.contains_key(*id)) {
            return Err(CorpusError::MissingDialogue {
                dialogue_id: missing.clone(),
                list: dir.join(list),
            });
        }
    }

    let mut out = SplitCorpora::default();
    for (id, value) in raw {
        let raw_dialogue: RawDialogue =
            serde_json::from_value(value).map_err(|e| CorpusError::Dialogue {
                path: data_path.clone(),
                dialogue_id: id.clone(),
                message: e.to_string(),
            })?;
        let act_key = id.strip_suffix(".json").unwrap_or(&id);
        let dialogue = convert_dialogue(&id, raw_dialogue, acts.get(act_key)).map_err(|message| {
            CorpusError::Dialogue {
                path: data_path.clone(),
                dialogue_id: id.clone(),
                message,
            }
        })?;
        if dev_ids.contains(&id) {
            out.dev.push(dialogue);
        } else if test_ids.contains(&id) {
            out.test.push(dialogue);
        } else {
            out.train.push(dialogue);
        }
    }
    Ok(out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn read_split_list(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let path: PathBuf = if path.exists() {
        path.to_path_buf()
    } else {
        let txt = path.with_extension("txt");
        if !txt.exists() {
            return Ok(HashSet::new());
        }
        txt
    };
    let text = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            if l.ends_with(".json") {
                l.to_string()
            } else {
                format!("{l}.json")
            }
        })
        .collect())
}

fn convert_dialogue(id: &str, raw: RawDialogue, acts: Option<&Value>) -> Result<Dialogue, String> {
    if raw.log.len() % 2 != 0 {
        return Err(format!(
            "log has {} entries; the final user turn has no state annotation",
            raw.log.len()
        ));
    }
    let mut turns = Vec::with_capacity(raw.log.len());
    for (pos, entry) in raw.log.iter().enumerate() {
        if pos % 2 == 0 {
            let state = state_from_metadata(&raw.log[pos + 1].metadata)
                .map_err(|e| format!("turn {pos}: {e}"))?;
            turns.push(Turn::user(&entry.text, state));
        } else if pos + 1 < raw.log.len() {
            // The agent response after the final user turn carries no
            // information for tracking and is dropped.
            let system_turn = (pos + 1) / 2;
            let act_value = entry
                .dialog_act
                .as_ref()
                .or_else(|| acts.and_then(|a| a.get(system_turn.to_string())));
            turns.push(Turn::agent(&entry.text, act_labels(act_value)));
        }
    }
    Ok(Dialogue {
        id: id.to_string(),
        turns,
    })
}

fn state_from_metadata(metadata: &Value) -> Result<DialogueState, String> {
    let obj = metadata
        .as_object()
        .ok_or_else(|| "agent turn metadata is not an object".to_string())?;
    let mut state = DialogueState::all_none();
    for (k, (domain, slot)) in MULTIWOZ_SLOTS.iter().enumerate() {
        let Some(dom) = obj.get(*domain) else { continue };
        let value = ["semi", "book"]
            .iter()
            .find_map(|part| dom.get(part).and_then(|p| p.get(*slot)))
            .and_then(Value::as_str);
        if let Some(v) = value {
            state.set(k, &canonical_value(v));
        }
    }
    Ok(state)
}

fn act_labels(value: Option<&Value>) -> Vec<String> {
    let Some(Value::Object(acts)) = value else {
        return Vec::new();
    };
    let mut labels = Vec::new();
    for (act, pairs) in acts {
        match pairs.as_array() {
            Some(pairs) if !pairs.is_empty() => {
                for pair in pairs {
                    let slot = pair.get(0).and_then(Value::as_str).unwrap_or("none");
                    labels.push(format!("{act}({slot})"));
                }
            }
            _ => labels.push(act.clone()),
        }
    }
    labels
}

/// Stable 64-bit FNV-1a hash, used for deterministic id-based subsampling.
pub fn stable_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// True for roughly `fraction` of all ids, chosen by hashed id.
pub fn in_subsample(id: &str, fraction: f64) -> bool {
    if fraction >= 1.0 {
        return true;
    }
    let bucket = stable_hash(id) % 10_000;
    (bucket as f64) < fraction * 10_000.0
}
