use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Speaker};
use crate::text::tokenize;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token-to-id table with reserved padding and unknown entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from tokens in first-occurrence order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocab::from(vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()]);
        for t in tokens {
            vocab.insert(t);
        }
        vocab
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }
}

/// Token vocabulary over training user utterances plus the tokens of
/// `extra` strings, and the act vocabulary over training agent turns.
pub fn corpus_vocabs<'a>(
    train: &'a [Dialogue],
    extra: impl IntoIterator<Item = &'a str>,
) -> (Vocab, Vocab) {
    let user_tokens = train
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::User)
        .flat_map(|t| t.tokens.iter().map(String::as_str));
    let extra_tokens: Vec<String> = extra.into_iter().flat_map(tokenize).collect();
    let tokens = Vocab::build(user_tokens.chain(extra_tokens.iter().map(String::as_str)));
    let acts = Vocab::build(
        train
            .iter()
            .flat_map(|d| &d.turns)
            .filter(|t| t.speaker == Speaker::Agent)
            .flat_map(|t| t.acts.iter().map(String::as_str)),
    );
    (tokens, acts)
}
