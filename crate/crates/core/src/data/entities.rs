//! Entity-description lookup.
//!
//! A [`SnapshotResolver`] answers from a local line-delimited JSON snapshot
//! (`{"name": ..., "description": ...}` per line). It also acts as a simple
//! gazetteer: [`SnapshotResolver::link`] finds snapshot names that occur
//! verbatim in tokenized text.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::dataset::{Document, RawEntity, Sentence};
use super::text::{tokenize, tokenize_text};
use crate::error::{Error, Result};
use crate::hparams::HyperParams;

pub trait EntityResolver {
    /// Description sentences for `name`; empty when unknown.
    fn describe(&self, name: &str) -> Vec<Sentence>;
}

/// Lowercase with collapsed whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Default)]
pub struct SnapshotResolver {
    descriptions: HashMap<String, String>,
    /// Tokenized names for gazetteer matching, longest first.
    patterns: Vec<(Vec<String>, String)>,
}

impl SnapshotResolver {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut r = Self::default();
        for (name, description) in entries {
            let key = normalize_name(name.as_ref());
            if key.is_empty() || r.descriptions.contains_key(&key) {
                continue;
            }
            r.patterns.push((tokenize(&key), key.clone()));
            r.descriptions.insert(key, description.as_ref().to_string());
        }
        r.patterns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        r
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: RawEntity = serde_json::from_str(&line).map_err(|e| Error::Schema {
                line: idx + 1,
                detail: e.to_string(),
            })?;
            entries.push((e.name, e.description));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.descriptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptions.is_empty()
    }

    /// Snapshot names occurring as exact token sequences in `sentences`, in
    /// order of first occurrence. Longer names win on overlap.
    pub fn link(&self, sentences: &[Sentence]) -> Vec<String> {
        let mut found: Vec<String> = Vec::new();
        for sentence in sentences {
            let mut i = 0;
            while i < sentence.len() {
                let hit = self.patterns.iter().find(|(pat, _)| {
                    !pat.is_empty()
                        && i + pat.len() <= sentence.len()
                        && sentence[i..i + pat.len()] == pat[..]
                });
                match hit {
                    Some((pat, key)) => {
                        if !found.contains(key) {
                            found.push(key.clone());
                        }
                        i += pat.len();
                    }
                    None => i += 1,
                }
            }
        }
        found
    }
}

impl EntityResolver for SnapshotResolver {
    fn describe(&self, name: &str) -> Vec<Sentence> {
        self.descriptions
            .get(&normalize_name(name))
            .map(|d| tokenize_text(d))
            .unwrap_or_default()
    }
}

/// Description sentences for a document: at most `sentences_per_entity` per
/// entity in document order, concatenated and cut to `max_entity_sentences`.
/// Entities without an inline description go to the resolver.
pub fn resolve_entities(
    doc: &Document,
    resolver: Option<&dyn EntityResolver>,
    hp: &HyperParams,
) -> Vec<Sentence> {
    let mut out = Vec::new();
    for entity in &doc.entities {
        let looked_up;
        let description = if !entity.description.is_empty() {
            &entity.description
        } else if let Some(r) = resolver {
            looked_up = r.describe(&entity.name);
            &looked_up
        } else {
            continue;
        };
        out.extend(description.iter().take(hp.sentences_per_entity).cloned());
        if out.len() >= hp.max_entity_sentences {
            break;
        }
    }
    out.truncate(hp.max_entity_sentences);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::EntityMention;
    use crate::hparams::Profile;

    fn doc(entities: Vec<EntityMention>) -> Document {
        Document {
            id: "d".into(),
            news: vec![vec!["x".into()]],
            comments: vec![],
            entities,
            label: 0,
        }
    }

    fn sentences(n: usize, tag: &str) -> Vec<Sentence> {
        (0..n).map(|i| vec![format!("{tag}{i}")]).collect()
    }

    #[test]
    fn no_entities_gives_nothing() {
        let hp = HyperParams::profile(Profile::GossipCop);
        assert!(resolve_entities(&doc(vec![]), None, &hp).is_empty());
    }

    #[test]
    fn keeps_first_four_per_entity() {
        let hp = HyperParams::profile(Profile::GossipCop);
        let d = doc(vec![EntityMention {
            name: "e".into(),
            description: sentences(6, "s"),
        }]);
        let out = resolve_entities(&d, None, &hp);
        assert_eq!(out, sentences(4, "s"));
    }

    #[test]
    fn caps_total_and_keeps_order() {
        let hp = HyperParams::profile(Profile::GossipCop);
        let ents = (0..30)
            .map(|k| EntityMention {
                name: format!("e{k}"),
                description: sentences(4, &format!("e{k}_")),
            })
            .collect();
        let out = resolve_entities(&doc(ents), None, &hp);
        assert_eq!(out.len(), 100);
        assert_eq!(out[0], vec!["e0_0".to_string()]);
        assert_eq!(out[99], vec!["e24_3".to_string()]);
    }

    #[test]
    fn resolver_fills_empty_descriptions_case_insensitively() {
        let hp = HyperParams::profile(Profile::CoAid);
        let r = SnapshotResolver::from_entries([("Getty  Images", "A photo agency. Based in Seattle.")]);
        let d = doc(vec![
            EntityMention {
                name: "getty images".into(),
                description: vec![],
            },
            EntityMention {
                name: "Unknown".into(),
                description: vec![],
            },
        ]);
        let out = resolve_entities(&d, Some(&r), &hp);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0][0], "a");
    }

    #[test]
    fn gazetteer_links_in_order() {
        let r = SnapshotResolver::from_entries([
            ("CDC", "x."),
            ("Getty Images", "y."),
            ("Getty", "z."),
        ]);
        let text = tokenize_text("Getty images said so. The CDC agreed with getty.");
        assert_eq!(r.link(&text), vec!["getty images", "cdc", "getty"]);
    }
}
