use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::input::CorpusDocument;
use crate::codec::{put_str, put_u16, put_u32, ByteReader, FormatError};
use crate::text::{canonical_token, canonical_tokens, sentences};

const DICT_VERSION: u16 = 1;
/// Longest capitalized span kept as a candidate.
const MAX_SPAN_WORDS: usize = 4;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few",
    "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him",
    "his", "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "may",
    "me", "might", "more", "most", "much", "must", "my", "no", "nor", "not", "now", "of", "off",
    "often", "on", "once", "only", "or", "other", "our", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "through", "thus", "to", "too", "under", "until", "up",
    "upon", "us", "very", "via", "was", "we", "were", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "within", "without", "would", "you", "your",
    // Relation verbs, so pattern words never become concepts.
    "belong", "belongs", "belonged", "contain", "contains", "contained", "containing", "depend",
    "depends", "depended", "dependent", "called", "known", "include", "includes", "including",
    "used", "using", "many", "several", "one", "two", "three",
];

pub fn default_stoplist() -> HashSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Canonical concept strings with corpus occurrence counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityDictionary {
    entries: BTreeMap<String, u32>,
    keys: HashSet<String>,
    max_words: usize,
}

impl EntityDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a canonical entity; empty strings are ignored.
    pub fn insert(&mut self, entity: String, count: u32) {
        if entity.is_empty() {
            return;
        }
        self.max_words = self.max_words.max(entity.split(' ').count());
        self.keys.insert(entity.clone());
        self.entries.insert(entity, count);
    }

    pub fn from_counts(counts: BTreeMap<String, u32>) -> Self {
        let mut d = Self::new();
        for (e, c) in counts {
            d.insert(e, c);
        }
        d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, entity: &str) -> bool {
        self.keys.contains(entity)
    }

    pub fn count(&self, entity: &str) -> Option<u32> {
        self.entries.get(entity).copied()
    }

    pub fn set_count(&mut self, entity: &str, count: u32) {
        if let Some(c) = self.entries.get_mut(entity) {
            *c = count;
        }
    }

    /// Entities in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Longest dictionary entry starting at `tokens[start]`, as a word count.
    fn longest_at(&self, tokens: &[String], start: usize, buf: &mut String) -> Option<usize> {
        let mut best = None;
        buf.clear();
        for len in 1..=self.max_words.min(tokens.len() - start) {
            if len > 1 {
                buf.push(' ');
            }
            buf.push_str(&tokens[start + len - 1]);
            if self.keys.contains(buf.as_str()) {
                best = Some(len);
            }
        }
        best
    }

    /// Left-to-right, longest-first, non-overlapping matches as `(start, len)`.
    pub fn find_longest(&self, tokens: &[String]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut buf = String::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.longest_at(tokens, i, &mut buf) {
                Some(len) => {
                    out.push((i, len));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }

    /// Every whole-word occurrence, overlapping ones included.
    pub fn find_all(&self, tokens: &[String], mut f: impl FnMut(&str)) {
        let mut buf = String::new();
        for start in 0..tokens.len() {
            buf.clear();
            for len in 1..=self.max_words.min(tokens.len() - start) {
                if len > 1 {
                    buf.push(' ');
                }
                buf.push_str(&tokens[start + len - 1]);
                if self.keys.contains(buf.as_str()) {
                    f(&buf);
                }
            }
        }
    }

    /// Distinct entities of `text` under longest-match scanning, in order of
    /// first appearance.
    pub fn recognize(&self, text: &str) -> Vec<String> {
        let tokens = canonical_tokens(text);
        let mut seen = HashSet::new();
        self.find_longest(&tokens)
            .into_iter()
            .map(|(s, l)| tokens[s..s + l].join(" "))
            .filter(|e| seen.insert(e.clone()))
            .collect()
    }

    /// `version u16 | count u32 | count * (entity, occurrences u32)`, ascending.
    pub fn encode_segment(&self, out: &mut Vec<u8>) {
        put_u16(out, DICT_VERSION);
        put_u32(out, self.entries.len() as u32);
        for (e, &c) in &self.entries {
            put_str(out, e);
            put_u32(out, c);
        }
    }

    pub fn decode_segment(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = ByteReader::new(bytes);
        let version = r.u16()?;
        if version != DICT_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let n = r.count(4 + 1 + 4)?;
        let mut d = Self::new();
        let mut prev: Option<String> = None;
        for _ in 0..n {
            let e = r.string("entity")?;
            let c = r.u32()?;
            if e.is_empty() || e.split(' ').any(|w| canonical_token(w).as_deref() != Some(w)) {
                return Err(FormatError::invalid("entity", format!("{e:?} is not canonical")));
            }
            if prev.as_ref().is_some_and(|p| *p >= e) {
                return Err(FormatError::invalid("entity", "entries not strictly ascending"));
            }
            prev = Some(e.clone());
            d.insert(e, c);
        }
        r.finish()?;
        Ok(d)
    }
}

fn is_content(tok: &str, stoplist: &HashSet<String>) -> bool {
    tok.chars().count() >= 3 && tok.chars().any(char::is_alphabetic) && !stoplist.contains(tok)
}

fn breaks_clause(raw: &str) -> bool {
    raw.ends_with([',', ';', ':', '.', '!', '?', ')', '('])
}

fn starts_upper(raw: &str) -> bool {
    raw.chars().find(|c| c.is_alphanumeric()).is_some_and(char::is_uppercase)
}

/// Heuristic concept extraction: capitalized multi-word spans plus content
/// unigrams and bigrams, kept when they occur at least `min_count` times.
pub fn extract_entities(
    docs: &[CorpusDocument],
    min_count: usize,
    stoplist: &HashSet<String>,
) -> EntityDictionary {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for doc in docs {
        for sentence in sentences(&doc.text) {
            let canon: Vec<Option<String>> = sentence.iter().map(|t| canonical_token(t)).collect();
            let mut spans: BTreeSet<(usize, usize)> = BTreeSet::new();
            for i in 0..sentence.len() {
                let Some(t) = canon[i].as_deref() else { continue };
                if !is_content(t, stoplist) {
                    continue;
                }
                spans.insert((i, 1));
                if i + 1 < sentence.len()
                    && !breaks_clause(sentence[i])
                    && canon[i + 1].as_deref().is_some_and(|n| is_content(n, stoplist))
                {
                    spans.insert((i, 2));
                }
            }
            capitalized_spans(&sentence, &canon, stoplist, &mut spans);
            for (s, l) in spans {
                let words: Vec<&str> = canon[s..s + l].iter().map(|w| w.as_deref().unwrap_or("")).collect();
                *counts.entry(words.join(" ")).or_default() += 1;
            }
        }
    }
    counts.retain(|_, c| *c as usize >= min_count.max(1));
    EntityDictionary::from_counts(counts)
}

/// Runs of capitalized words, trimmed of stopwords at both ends.
fn capitalized_spans(
    raw: &[&str],
    canon: &[Option<String>],
    stoplist: &HashSet<String>,
    spans: &mut BTreeSet<(usize, usize)>,
) {
    let mut i = 0;
    while i < raw.len() {
        if !(starts_upper(raw[i]) && canon[i].is_some()) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < raw.len() && starts_upper(raw[j]) && canon[j].is_some() && !breaks_clause(raw[j - 1]) {
            j += 1;
        }
        let stop = |k: usize| canon[k].as_ref().is_some_and(|w| stoplist.contains(w));
        let (mut s, mut e) = (i, j);
        while s < e && stop(s) {
            s += 1;
        }
        while e > s && stop(e - 1) {
            e -= 1;
        }
        if e - s >= 2 && e - s <= MAX_SPAN_WORDS {
            spans.insert((s, e - s));
        }
        i = j;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> CorpusDocument {
        CorpusDocument {
            doc_id: "d".into(),
            text: text.into(),
        }
    }

    fn dict(words: &[&str]) -> EntityDictionary {
        let mut d = EntityDictionary::new();
        for w in words {
            d.insert(w.to_string(), 1);
        }
        d
    }

    #[test]
    fn repeated_phrase_is_extracted() {
        let text = "Patients with Horner's syndrome show ptosis. ".repeat(6);
        let d = extract_entities(&[doc(&text)], 2, &default_stoplist());
        assert_eq!(d.count("horner's syndrome"), Some(6));
        assert!(!d.contains("the"));
        assert!(!d.contains("with"));
    }

    #[test]
    fn stopwords_and_rare_terms_are_dropped() {
        let d = extract_entities(&[doc("The cell is the cell. The rare word appears.")], 2, &default_stoplist());
        assert!(d.contains("cell"));
        assert!(!d.contains("the"));
        assert!(!d.contains("rare"));
    }

    #[test]
    fn capitalized_span_trims_stopwords() {
        let text = "Then The Krebs Cycle runs. Later The Krebs Cycle stops.";
        let d = extract_entities(&[doc(text)], 2, &default_stoplist());
        assert!(d.contains("krebs cycle"), "{:?}", d.iter().collect::<Vec<_>>());
    }

    #[test]
    fn longest_match_prefers_longer_entry() {
        let d = dict(&["iron-sulfur protein", "protein", "horner's syndrome"]);
        assert_eq!(d.recognize("Is the iron-sulfur protein a protein?"), vec!["iron-sulfur protein", "protein"]);
        assert_eq!(d.recognize("what causes horner's syndrome?"), vec!["horner's syndrome"]);
        assert!(d.recognize("nothing here").is_empty());
    }

    #[test]
    fn find_all_reports_overlaps() {
        let d = dict(&["iron-sulfur protein", "protein"]);
        let mut seen = Vec::new();
        d.find_all(&canonical_tokens("iron-sulfur protein"), |e| seen.push(e.to_string()));
        assert_eq!(seen, vec!["iron-sulfur protein", "protein"]);
    }

    #[test]
    fn segment_roundtrip_and_validation() {
        let d = dict(&["cell", "cell membrane"]);
        let mut bytes = Vec::new();
        d.encode_segment(&mut bytes);
        assert_eq!(EntityDictionary::decode_segment(&bytes).unwrap(), d);

        let mut bad = Vec::new();
        dict(&["Cell"]).encode_segment(&mut bad);
        assert!(EntityDictionary::decode_segment(&bad).is_err());
    }
}
