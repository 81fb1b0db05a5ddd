//! Tokenization and value normalization shared by every component.

/// Characters split off as standalone tokens wherever they occur.
const SPLIT_PUNCT: &[char] = &[',', ';', '!', '?', '"', '(', ')', '[', ']', '{', '}'];

/// Characters peeled off only at the edges of a whitespace chunk, so that
/// `12:30`, `rosa's` and `hotel-request` survive as single tokens.
const EDGE_PUNCT: &[char] = &['.', ':', '\'', '-', '`', '/', '*', '&', '#', '+', '='];

/// Sentinel for an unset slot.
pub const NONE_VALUE: &str = "none";
/// Sentinel for "user has no preference".
pub const DONTCARE_VALUE: &str = "dontcare";

/// Lowercases, separates punctuation, and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut spaced = String::with_capacity(lowered.len() + 8);
    for ch in lowered.chars() {
        if SPLIT_PUNCT.contains(&ch) {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }

    let mut tokens = Vec::new();
    for chunk in spaced.split_whitespace() {
        let mut lead = Vec::new();
        let mut rest = chunk;
        while let Some(c) = rest.chars().next() {
            if EDGE_PUNCT.contains(&c) && rest.len() > c.len_utf8() {
                lead.push(c.to_string());
                rest = &rest[c.len_utf8()..];
            } else {
                break;
            }
        }
        let mut trail = Vec::new();
        while let Some(c) = rest.chars().last() {
            if EDGE_PUNCT.contains(&c) && rest.len() > c.len_utf8() {
                trail.push(c.to_string());
                rest = &rest[..rest.len() - c.len_utf8()];
            } else {
                break;
            }
        }
        tokens.extend(lead);
        tokens.push(rest.to_string());
        tokens.extend(trail.into_iter().rev());
    }
    tokens
}

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_value(value: &str) -> String {
    value
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Maps a raw annotation value onto the canonical value space, folding the
/// corpus' spellings of the two sentinels.
pub fn canonical_value(raw: &str) -> String {
    let norm = normalize_value(raw);
    match norm.as_str() {
        "" | "not mentioned" | "none" => NONE_VALUE.to_string(),
        "dontcare" | "dont care" | "don't care" | "do n't care" | "do nt care"
        | "doesn't care" => DONTCARE_VALUE.to_string(),
        _ => norm,
    }
}

/// True for integers and `HH:MM` clock times.
pub fn is_numeric_token(token: &str) -> bool {
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if all_digits(token) {
        return true;
    }
    match token.split_once(':') {
        Some((h, m)) => all_digits(h) && h.len() <= 2 && m.len() == 2 && all_digits(m),
        None => false,
    }
}
