//! Synthetic corpora whose labels are decidable from planted cue tokens.
//!
//! Every document mentions one key entity plus up to two distractors. Entity
//! names are fresh pseudo-words, so a name seen at test time was never seen in
//! training and carries no label information by itself. Depending on
//! [`CueSources`], the label is planted as:
//!
//! * a cue word inside a news sentence;
//! * a cue word in the first (defining) sentence of the key entity's
//!   description, resolved through the entity snapshot;
//! * a cue word in a later comment (never the first one).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{write_records, RawEntity, RawRecord};
use crate::error::{Error, Result};

pub const FILLER: &[&str] = &[
    "the", "a", "is", "of", "and", "to", "in", "on", "with", "for", "people", "city", "week",
    "today", "report", "said", "new", "local", "year", "after", "before", "group", "public",
    "many", "some", "about", "from", "this", "that", "they", "were", "has", "been", "was", "more",
    "time", "world", "video", "photo", "story", "post", "night", "day", "state", "film", "music",
    "show", "star",
];
pub const NEWS_CUES_FAKE: &[&str] = &["shocking", "breaking", "miracle", "exposed"];
pub const NEWS_CUES_REAL: &[&str] = &["reported", "announced", "according", "statement"];
pub const ENTITY_CUES_FAKE: &[&str] = &["hoax", "fabricated", "satirical", "bogus"];
pub const ENTITY_CUES_REAL: &[&str] = &["official", "accredited", "reputable", "governmental"];
pub const ENTITY_KINDS: &[&str] = &["company", "town", "musician", "river", "band", "brand", "team", "school"];
pub const COMMENT_CUES_FAKE: &[&str] = &["debunked", "fake", "false", "misleading"];
pub const COMMENT_CUES_REAL: &[&str] = &["confirmed", "true", "legit", "accurate"];

/// Share of a cue embedding taken by its class direction.
const CUE_WEIGHT: f64 = 0.9;

const SYLLABLES: &[&str] = &[
    "zor", "vex", "kal", "mir", "dun", "bra", "tel", "qui", "nor", "pax", "lum", "syl", "gor",
    "fen", "rad", "vo", "ix", "tam", "bel", "cor",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueSources {
    pub news: bool,
    pub comments: bool,
    pub entities: bool,
}

impl CueSources {
    pub const ALL: Self = Self {
        news: true,
        comments: true,
        entities: true,
    };
    pub const ENTITIES: Self = Self {
        news: false,
        comments: false,
        entities: true,
    };
    pub const COMMENTS: Self = Self {
        news: false,
        comments: true,
        entities: false,
    };
    pub const NEWS: Self = Self {
        news: true,
        comments: false,
        entities: false,
    };

    fn any(&self) -> bool {
        self.news || self.comments || self.entities
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub size: usize,
    /// Fraction of fake (label 1) documents.
    pub fake_fraction: f64,
    /// Sources that may carry the label cue. With several enabled, each
    /// document gets a random non-empty subset of them.
    pub cues: CueSources,
    pub embedding_dim: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            size: 200,
            fake_fraction: 0.5,
            cues: CueSources::ALL,
            embedding_dim: 32,
            seed: 7,
        }
    }
}

/// Where the cue for one document was planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCue {
    pub id: String,
    pub label: u8,
    pub sources: CueSources,
    /// Index of the key entity's defining sentence in the resolved
    /// entity-description list.
    pub definition_index: usize,
    /// Number of resolved entity-description sentences.
    pub description_sentences: usize,
    /// Index of the cue sentence among pooled comment sentences, if any.
    pub comment_cue_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<RawRecord>,
    pub snapshot: Vec<RawEntity>,
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub planted: Vec<PlantedCue>,
}

struct Gen {
    rng: ChaCha8Rng,
    next_name: usize,
    name_order: Vec<usize>,
}

impl Gen {
    fn filler(&mut self, n: usize) -> Vec<String> {
        (0..n)
            .map(|_| FILLER.choose(&mut self.rng).unwrap().to_string())
            .collect()
    }

    fn pick(&mut self, words: &[&str]) -> String {
        words.choose(&mut self.rng).unwrap().to_string()
    }

    fn fresh_name(&mut self) -> String {
        let k = self.name_order[self.next_name % self.name_order.len()];
        self.next_name += 1;
        let n = SYLLABLES.len();
        let mut name: String = [k / (n * n), (k / n) % n, k % n]
            .iter()
            .map(|&i| SYLLABLES[i])
            .collect();
        if let Some(first) = name.get_mut(0..1) {
            first.make_ascii_uppercase();
        }
        name
    }

    fn insert_random(&mut self, words: &mut Vec<String>, token: String) {
        let pos = self.rng.gen_range(0..=words.len());
        words.insert(pos, token);
    }
}

fn sentence_text(words: &[String]) -> String {
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

/// Builds a corpus. Identical specs give identical corpora.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SyntheticCorpus> {
    if !spec.cues.any() {
        return Err(Error::Contract("at least one cue source must be enabled".into()));
    }
    if !(0.0..=1.0).contains(&spec.fake_fraction) {
        return Err(Error::Contract("fake_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total_names = SYLLABLES.len().pow(3);
    let mut name_order: Vec<usize> = (0..total_names).collect();
    name_order.shuffle(&mut rng);
    let mut gen = Gen {
        rng,
        next_name: 0,
        name_order,
    };

    let n_fake = (spec.size as f64 * spec.fake_fraction).round() as usize;
    let mut labels: Vec<u8> = (0..spec.size).map(|i| u8::from(i < n_fake)).collect();
    labels.shuffle(&mut gen.rng);

    let mut records = Vec::with_capacity(spec.size);
    let mut snapshot = Vec::new();
    let mut planted = Vec::with_capacity(spec.size);
    let mut names = Vec::new();

    for (doc_idx, &label) in labels.iter().enumerate() {
        let fake = label == 1;
        let sources = loop {
            let s = CueSources {
                news: spec.cues.news && gen.rng.gen_bool(0.5),
                comments: spec.cues.comments && gen.rng.gen_bool(0.5),
                entities: spec.cues.entities && gen.rng.gen_bool(0.5),
            };
            if s.any() {
                break s;
            }
        };

        // entities: key first in generation, then shuffled into place
        let n_distractors = gen.rng.gen_range(0..=2);
        let mut entities: Vec<(String, Vec<String>, bool)> = Vec::new();
        for k in 0..=n_distractors {
            let is_key = k == 0;
            let name = gen.fresh_name();
            let kind = if is_key && sources.entities {
                gen.pick(if fake { ENTITY_CUES_FAKE } else { ENTITY_CUES_REAL })
            } else {
                gen.pick(ENTITY_KINDS)
            };
            let mut definition = vec![name.to_lowercase(), "is".into(), "a".into(), kind];
            let extra = gen.rng.gen_range(2..=4);
            definition.extend(gen.filler(extra));
            let mut sentences = vec![sentence_text(&definition)];
            for _ in 0..gen.rng.gen_range(0..=1) {
                let len = gen.rng.gen_range(4..=7);
                let words = gen.filler(len);
                sentences.push(sentence_text(&words));
            }
            entities.push((name, sentences, is_key));
        }
        entities.shuffle(&mut gen.rng);
        let mut definition_index = 0;
        let mut description_sentences = 0;
        for (_, sentences, is_key) in &entities {
            if *is_key {
                definition_index = description_sentences;
            }
            description_sentences += sentences.len();
        }

        // news
        let n_news = gen.rng.gen_range(2..=4);
        let mut news: Vec<Vec<String>> = (0..n_news)
            .map(|_| {
                let len = gen.rng.gen_range(5..=8);
                gen.filler(len)
            })
            .collect();
        for (name, _, _) in &entities {
            let s = gen.rng.gen_range(0..n_news);
            gen.insert_random(&mut news[s], name.clone());
        }
        if sources.news {
            let s = gen.rng.gen_range(0..n_news);
            let cue = gen.pick(if fake { NEWS_CUES_FAKE } else { NEWS_CUES_REAL });
            gen.insert_random(&mut news[s], cue);
        }

        // comments
        let n_comments = gen.rng.gen_range(2..=4);
        let cue_comment = sources.comments.then(|| gen.rng.gen_range(1..n_comments));
        let mut comments = Vec::with_capacity(n_comments);
        let mut pooled = 0;
        let mut comment_cue_index = None;
        for c in 0..n_comments {
            let n_sent = gen.rng.gen_range(1..=2);
            let mut sentences: Vec<Vec<String>> = (0..n_sent)
                .map(|_| {
                    let len = gen.rng.gen_range(4..=7);
                    gen.filler(len)
                })
                .collect();
            if cue_comment == Some(c) {
                let cue = gen.pick(if fake { COMMENT_CUES_FAKE } else { COMMENT_CUES_REAL });
                gen.insert_random(&mut sentences[0], cue);
                comment_cue_index = Some(pooled);
            }
            pooled += n_sent;
            comments.push(sentences.iter().map(|s| sentence_text(s)).collect::<Vec<_>>().join(" "));
        }

        let id = format!("syn-{doc_idx:04}");
        for (name, sentences, _) in &entities {
            names.push(name.to_lowercase());
            snapshot.push(RawEntity {
                name: name.clone(),
                description: sentences.join(" "),
            });
        }
        records.push(RawRecord {
            id: id.clone(),
            label,
            news: news.iter().map(|s| sentence_text(s)).collect::<Vec<_>>().join(" "),
            comments,
            entities: entities
                .iter()
                .map(|(name, _, _)| RawEntity {
                    name: name.clone(),
                    description: String::new(),
                })
                .collect(),
        });
        planted.push(PlantedCue {
            id,
            label,
            sources,
            definition_index,
            description_sentences,
            comment_cue_index,
        });
    }

    let mut vocab: Vec<String> = FILLER
        .iter()
        .chain(NEWS_CUES_FAKE)
        .chain(NEWS_CUES_REAL)
        .chain(ENTITY_CUES_FAKE)
        .chain(ENTITY_CUES_REAL)
        .chain(ENTITY_KINDS)
        .chain(COMMENT_CUES_FAKE)
        .chain(COMMENT_CUES_REAL)
        .map(|s| s.to_string())
        .collect();
    vocab.push(".".into());
    vocab.extend(names);
    // Cue words of one class share a direction, as semantically related
    // words do in pretrained embeddings; everything else is isotropic noise.
    let direction: Vec<f64> = (0..spec.embedding_dim)
        .map(|_| if gen.rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let fake_cues: Vec<&str> = [NEWS_CUES_FAKE, ENTITY_CUES_FAKE, COMMENT_CUES_FAKE].concat();
    let real_cues: Vec<&str> = [NEWS_CUES_REAL, ENTITY_CUES_REAL, COMMENT_CUES_REAL].concat();
    let embeddings = vocab
        .into_iter()
        .map(|tok| {
            let sign = if fake_cues.contains(&tok.as_str()) {
                1.0
            } else if real_cues.contains(&tok.as_str()) {
                -1.0
            } else {
                0.0
            };
            let v = direction
                .iter()
                .map(|&u| {
                    let noise: f64 = gen.rng.gen_range(-1.0..1.0);
                    let x = if sign == 0.0 {
                        noise
                    } else {
                        CUE_WEIGHT * sign * u + (1.0 - CUE_WEIGHT) * noise
                    };
                    round6(x)
                })
                .collect();
            (tok, v)
        })
        .collect();

    Ok(SyntheticCorpus {
        records,
        snapshot,
        embeddings,
        planted,
    })
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub const DATA_FILE: &str = "data.jsonl";
pub const SNAPSHOT_FILE: &str = "entities.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const CUES_FILE: &str = "cues.jsonl";

impl SyntheticCorpus {
    /// Writes the dataset, entity snapshot, embeddings and cue metadata.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_records(dir.join(DATA_FILE), &self.records)?;
        write_lines(&dir.join(SNAPSHOT_FILE), self.snapshot.iter().map(json_line))?;
        write_lines(&dir.join(CUES_FILE), self.planted.iter().map(json_line))?;
        write_lines(
            &dir.join(EMBEDDINGS_FILE),
            self.embeddings.iter().map(|(tok, v)| {
                let mut line = tok.clone();
                for x in v {
                    line.push(' ');
                    line.push_str(&format!("{x:.6}"));
                }
                line
            }),
        )
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain structs serialize")
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_planted(path: impl AsRef<Path>) -> Result<Vec<PlantedCue>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema {
                line: i + 1,
                detail: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_labels() {
        let c = gen_synthetic(&SynthSpec::default()).unwrap();
        assert_eq!(c.records.len(), 200);
        assert_eq!(c.records.iter().filter(|r| r.label == 1).count(), 100);
    }

    #[test]
    fn names_are_unique() {
        let c = gen_synthetic(&SynthSpec::default()).unwrap();
        let mut names: Vec<_> = c.snapshot.iter().map(|e| e.name.to_lowercase()).collect();
        let n = names.len();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), n);
    }

    #[test]
    fn rejects_no_cue_sources() {
        let spec = SynthSpec {
            cues: CueSources {
                news: false,
                comments: false,
                entities: false,
            },
            ..Default::default()
        };
        assert!(gen_synthetic(&spec).is_err());
    }
}
