//! Pattern-based relation extraction over dictionary-segmented sentences.

use super::entities::EntityDictionary;
use super::input::CorpusDocument;
use crate::forest::{RelationEdge, RelationKind};
use crate::text::{canonical_token, sentences};

enum Item {
    Entity { name: String, brk: bool },
    Word { word: String, brk: bool },
}

impl Item {
    fn brk(&self) -> bool {
        match self {
            Item::Entity { brk, .. } | Item::Word { brk, .. } => *brk,
        }
    }

    fn word(&self) -> Option<&str> {
        match self {
            Item::Word { word, .. } => Some(word),
            Item::Entity { .. } => None,
        }
    }
}

const BELONGS: &[&[&str]] = &[&["belongs", "to"], &["belong", "to"], &["belonged", "to"]];
const DEPENDS: &[&[&str]] = &[
    &["is", "dependent", "on"],
    &["are", "dependent", "on"],
    &["was", "dependent", "on"],
    &["were", "dependent", "on"],
    &["depends", "on"],
    &["depend", "on"],
];
const CONTAINS: &[&[&str]] = &[&["contains"], &["contain"], &["contained"]];
const DETERMINERS: &[&str] = &["the", "a", "an"];

/// Segments one sentence into entity and word items. `brk` marks a comma or
/// other clause punctuation right after the item.
fn segment(raw: &[&str], dict: &EntityDictionary) -> Vec<Item> {
    let mut tokens = Vec::with_capacity(raw.len());
    let mut brks: Vec<bool> = Vec::with_capacity(raw.len());
    for r in raw {
        let b = r.ends_with([',', ';', ':']);
        match canonical_token(r) {
            Some(t) => {
                tokens.push(t);
                brks.push(b);
            }
            None => {
                if let Some(last) = brks.last_mut() {
                    *last |= b || r.chars().all(|c| c == ',' || c == ';');
                }
            }
        }
    }
    let mut items = Vec::with_capacity(tokens.len());
    let mut next = 0;
    for (s, l) in dict.find_longest(&tokens) {
        for i in next..s {
            items.push(Item::Word {
                word: std::mem::take(&mut tokens[i]),
                brk: brks[i],
            });
        }
        items.push(Item::Entity {
            name: tokens[s..s + l].join(" "),
            brk: brks[s + l - 1],
        });
        next = s + l;
    }
    for i in next..tokens.len() {
        items.push(Item::Word {
            word: std::mem::take(&mut tokens[i]),
            brk: brks[i],
        });
    }
    items
}

/// Entities joined by commas, `and` or `or`, starting at `i`. Returns the
/// names and the index just past the last entity.
fn group(items: &[Item], i: usize) -> (Vec<&str>, usize) {
    let mut names = Vec::new();
    let mut j = i;
    while let Some(Item::Entity { name, brk }) = items.get(j) {
        names.push(name.as_str());
        j += 1;
        let mut k = j;
        let mut sep = *brk;
        if matches!(items.get(k).and_then(Item::word), Some("and" | "or")) {
            sep = true;
            k += 1;
        }
        if sep && matches!(items.get(k), Some(Item::Entity { .. })) {
            j = k;
        } else {
            break;
        }
    }
    (names, j)
}

/// Length of the first phrase in `phrases` matching the words at `at`.
fn phrase_at(items: &[Item], at: usize, phrases: &[&[&str]]) -> Option<usize> {
    phrases.iter().find_map(|p| {
        let ok = p
            .iter()
            .enumerate()
            .all(|(o, w)| items.get(at + o).and_then(Item::word) == Some(*w));
        ok.then_some(p.len())
    })
}

fn skip_determiners(items: &[Item], mut at: usize) -> usize {
    while items
        .get(at)
        .and_then(Item::word)
        .is_some_and(|w| DETERMINERS.contains(&w))
    {
        at += 1;
    }
    at
}

fn push(out: &mut Vec<RelationEdge>, child: &str, parent: &str, kind: RelationKind) {
    out.push(RelationEdge::new(child, parent, kind));
}

fn sentence_relations(items: &[Item], out: &mut Vec<RelationEdge>) {
    for i in 0..items.len().saturating_sub(1) {
        if let (Item::Entity { name: y, brk: false }, Item::Entity { name: x, .. }) = (&items[i], &items[i + 1]) {
            push(out, x, y, RelationKind::Modifier);
        }
    }
    let mut i = 0;
    while i < items.len() {
        if !matches!(items[i], Item::Entity { .. }) {
            i += 1;
            continue;
        }
        let (subjects, j) = group(items, i);
        let last_brk = items[j - 1].brk();
        let verb = if last_brk {
            None
        } else if let Some(n) = phrase_at(items, j, BELONGS) {
            Some((RelationKind::BelongsTo, n))
        } else if let Some(n) = phrase_at(items, j, DEPENDS) {
            Some((RelationKind::DependsOn, n))
        } else {
            phrase_at(items, j, CONTAINS).map(|n| (RelationKind::Contains, n))
        };
        if let Some((kind, n)) = verb {
            let start = skip_determiners(items, j + n);
            let (objects, _) = group(items, start);
            for s in &subjects {
                for o in &objects {
                    match kind {
                        RelationKind::Contains => push(out, o, s, kind),
                        _ => push(out, s, o, kind),
                    }
                }
            }
        }
        i = j;
    }
}

/// Child-to-parent concept edges from "X belongs to Y", "Y contains X",
/// "X is dependent on Y" / "X depends on Y", and adjacent entity pairs
/// "Y X" read as X under Y. Conjoined entities share the relation.
pub fn extract_relations(docs: &[CorpusDocument], dict: &EntityDictionary) -> Vec<RelationEdge> {
    let mut out = Vec::new();
    if dict.is_empty() {
        return out;
    }
    for doc in docs {
        for sentence in sentences(&doc.text) {
            let items = segment(&sentence, dict);
            if items.iter().filter(|it| matches!(it, Item::Entity { .. })).count() >= 2 {
                sentence_relations(&items, &mut out);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str, entities: &[&str]) -> Vec<(String, String, RelationKind)> {
        let mut d = EntityDictionary::new();
        for e in entities {
            d.insert(e.to_string(), 1);
        }
        let docs = [CorpusDocument {
            doc_id: "d".into(),
            text: text.into(),
        }];
        extract_relations(&docs, &d)
            .into_iter()
            .map(|e| (e.child, e.parent, e.kind))
            .collect()
    }

    fn e(c: &str, p: &str, k: RelationKind) -> (String, String, RelationKind) {
        (c.into(), p.into(), k)
    }

    #[test]
    fn belongs_to() {
        assert_eq!(
            run("Mitochondria belongs to the cell.", &["mitochondria", "cell"]),
            vec![e("mitochondria", "cell", RelationKind::BelongsTo)]
        );
    }

    #[test]
    fn contains_with_conjunction() {
        assert_eq!(
            run("The cell contains mitochondria and ribosomes.", &["mitochondria", "ribosomes", "cell"]),
            vec![
                e("mitochondria", "cell", RelationKind::Contains),
                e("ribosomes", "cell", RelationKind::Contains),
            ]
        );
    }

    #[test]
    fn conjoined_subjects_share_parent() {
        assert_eq!(
            run("Lysosomes, vacuoles and ribosomes belong to the cell.", &["lysosomes", "vacuoles", "ribosomes", "cell"]),
            vec![
                e("lysosomes", "cell", RelationKind::BelongsTo),
                e("vacuoles", "cell", RelationKind::BelongsTo),
                e("ribosomes", "cell", RelationKind::BelongsTo),
            ]
        );
    }

    #[test]
    fn dependency_patterns() {
        let ents = ["ubiquinone", "cytochrome", "flavoprotein"];
        assert_eq!(
            run("Ubiquinone is dependent on cytochrome.", &ents),
            vec![e("ubiquinone", "cytochrome", RelationKind::DependsOn)]
        );
        assert_eq!(
            run("Flavoprotein depends on the ubiquinone.", &ents),
            vec![e("flavoprotein", "ubiquinone", RelationKind::DependsOn)]
        );
    }

    #[test]
    fn adjacent_entities_form_modifier_edge() {
        let got = run("A cell membrane surrounds it.", &["cell", "membrane"]);
        assert_eq!(got, vec![e("membrane", "cell", RelationKind::Modifier)]);
        let got = run("Cell, membrane and wall.", &["cell", "membrane", "wall"]);
        assert!(got.is_empty());
    }

    #[test]
    fn single_entity_sentence_is_ignored() {
        assert!(run("The cell belongs to nothing.", &["cell"]).is_empty());
    }
}
