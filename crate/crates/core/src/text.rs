//! Tokenization and canonical forms shared by ingest, embedding and query recognition.
//!
//! A *token* is a whitespace-separated word. The canonical form of a token is
//! lowercased with leading and trailing punctuation stripped; apostrophes and
//! hyphens inside a word survive (`Horner's` -> `horner's`, `iron-sulfur`
//! stays intact).

/// Splits on Unicode whitespace.
pub fn raw_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

/// Canonical form of a single raw token, or `None` when nothing word-like remains.
pub fn canonical_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return None;
    }
    let mut out = String::with_capacity(trimmed.len());
    for c in trimmed.chars() {
        match c {
            '\u{2019}' | '\u{2018}' | '`' => out.push('\''),
            _ => out.extend(c.to_lowercase()),
        }
    }
    Some(out)
}

/// Canonical token stream of `text`.
pub fn canonical_tokens(text: &str) -> Vec<String> {
    raw_tokens(text).filter_map(canonical_token).collect()
}

/// Lowercased, punctuation-trimmed, single-spaced form used for dictionary keys.
pub fn canonicalize(text: &str) -> String {
    canonical_tokens(text).join(" ")
}

/// Collapses runs of whitespace and drops control characters.
pub fn clean_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text
        .split(|c: char| c.is_whitespace() || c.is_control())
        .filter(|w| !w.is_empty())
    {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn ends_sentence(token: &str) -> bool {
    let core = token.trim_end_matches(['"', '\'', ')', ']', '\u{201d}', '\u{2019}']);
    core.ends_with(['.', '!', '?'])
}

/// Splits text into sentences, each a list of raw tokens. A sentence ends at a
/// token whose last non-quote character is `.`, `!` or `?`.
pub fn sentences(text: &str) -> Vec<Vec<&str>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for tok in raw_tokens(text) {
        current.push(tok);
        if ends_sentence(tok) {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// First sentence of `text`, whitespace-normalized.
pub fn lead_sentence(text: &str) -> String {
    sentences(text)
        .into_iter()
        .next()
        .map(|s| s.join(" "))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes_queries() {
        assert_eq!(canonicalize("What causes Horner's syndrome?"), "what causes horner's syndrome");
        assert_eq!(canonicalize("  Iron-Sulfur   PROTEIN, "), "iron-sulfur protein");
        assert_eq!(canonicalize("Horner\u{2019}s"), "horner's");
        assert_eq!(canonicalize("... !!"), "");
    }

    #[test]
    fn splits_sentences() {
        let s = sentences("One two. Three four! \"Five?\" six");
        assert_eq!(s, vec![vec!["One", "two."], vec!["Three", "four!"], vec!["\"Five?\""], vec!["six"]]);
        assert!(sentences("   ").is_empty());
    }

    #[test]
    fn cleans_whitespace_and_controls() {
        assert_eq!(clean_text(" a\t\tb\u{0}c \n d "), "a b c d");
    }
}
