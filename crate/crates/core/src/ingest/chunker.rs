use crate::config::MIN_CHUNK_LEN;
use crate::text::sentences;

/// Packs whole sentences greedily into chunks of at most `target_len`
/// whitespace tokens. A sentence longer than the target becomes a chunk of
/// its own. Tokens are rejoined with single spaces.
///
/// # Panics
/// If `target_len` is below the configured minimum.
pub fn chunk_document(text: &str, target_len: usize) -> Vec<String> {
    assert!(target_len >= MIN_CHUNK_LEN, "chunk length {target_len} below {MIN_CHUNK_LEN}");
    let mut chunks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for sentence in sentences(text) {
        if !current.is_empty() && current.len() + sentence.len() > target_len {
            chunks.push(current.join(" "));
            current.clear();
        }
        current.extend_from_slice(&sentence);
    }
    if !current.is_empty() {
        chunks.push(current.join(" "));
    }
    chunks
}
