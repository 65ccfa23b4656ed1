//! Line-oriented input formats: corpus JSONL, entity JSONL and relation TSV.

use serde::Deserialize;
use thiserror::Error;

use crate::forest::{RelationEdge, RelationKind};
use crate::text::{canonicalize, clean_text};

/// Parse failure at a 1-based line number.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct InputError {
    pub line: usize,
    pub message: String,
}

fn at(line: usize, message: impl Into<String>) -> InputError {
    InputError {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct CorpusDocument {
    pub doc_id: String,
    pub text: String,
}

/// One `{"doc_id", "text"}` object per line; blank lines are skipped.
/// Text is whitespace-cleaned and must not end up empty.
pub fn parse_corpus_jsonl(input: &str) -> Result<Vec<CorpusDocument>, InputError> {
    let mut docs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: CorpusDocument =
            serde_json::from_str(line).map_err(|e| at(i + 1, e.to_string()))?;
        doc.text = clean_text(&doc.text);
        if doc.text.is_empty() {
            return Err(at(i + 1, format!("document {:?} has no text", doc.doc_id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Deserialize)]
struct EntityLine {
    entity: String,
}

/// One `{"entity"}` object per line, canonicalized. Duplicates collapse;
/// first-seen order is kept.
pub fn parse_entities_jsonl(input: &str) -> Result<Vec<String>, InputError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: EntityLine = serde_json::from_str(line).map_err(|e| at(i + 1, e.to_string()))?;
        let canon = canonicalize(&e.entity);
        if canon.is_empty() {
            return Err(at(i + 1, "entity is empty after canonicalization"));
        }
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    Ok(out)
}

/// Tab-separated `child parent kind confidence`. An optional header line
/// starting with `child` is skipped, as are blank lines and `#` comments.
pub fn parse_relations_tsv(input: &str) -> Result<Vec<RelationEdge>, InputError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if n == 1 && cols.first().is_some_and(|c| c.trim() == "child") {
            continue;
        }
        if cols.len() != 4 {
            return Err(at(n, format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let child = canonicalize(cols[0]);
        let parent = canonicalize(cols[1]);
        if child.is_empty() || parent.is_empty() {
            return Err(at(n, "empty concept"));
        }
        let kind = RelationKind::parse(cols[2].trim())
            .ok_or_else(|| at(n, format!("unknown relation kind {:?}", cols[2].trim())))?;
        let confidence = cols[3]
            .trim()
            .parse::<u8>()
            .map_err(|e| at(n, format!("bad confidence: {e}")))?;
        out.push(RelationEdge {
            child,
            parent,
            kind,
            confidence,
        });
    }
    Ok(out)
}
