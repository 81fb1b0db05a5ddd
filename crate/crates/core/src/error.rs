use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
#[error("malformed slot key {0:?}: expected `domain.slot`")]
pub struct ParseSlotKeyError(pub String);

/// Errors raised while reading a corpus from disk.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed dialogue {dialogue_id} in {path}: {message}")]
    Dialogue {
        path: PathBuf,
        dialogue_id: String,
        message: String,
    },
    #[error("dialogue {dialogue_id} is listed in {list} but missing from the corpus")]
    MissingDialogue { dialogue_id: String, list: PathBuf },
}

/// Errors raised when prediction files disagree with each other or with gold.
#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("no prediction for {} turn(s): {}", .0.len(), format_turns(.0))]
    MissingTurns(Vec<(String, usize)>),
    #[error("prediction sets are not aligned: {0}")]
    Misaligned(String),
    #[error("need an odd, nonzero number of runs to vote, got {0}")]
    RunCount(usize),
}

fn format_turns(turns: &[(String, usize)]) -> String {
    let shown: Vec<String> = turns
        .iter()
        .take(10)
        .map(|(d, t)| format!("{d}#{t}"))
        .collect();
    if turns.len() > shown.len() {
        format!("{} ...", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {loss}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training examples")]
    Empty,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("invalid checkpoint: {0}")]
    Format(String),
}
