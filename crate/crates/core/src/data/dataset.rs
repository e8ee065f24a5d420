use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::text::tokenize_text;
use crate::error::{Error, Result};

pub type Sentence = Vec<String>;

/// An entity linked in the news text, with its description sentences.
/// An empty description means "ask the resolver".
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMention {
    pub name: String,
    pub description: Vec<Sentence>,
}

/// One labelled sample. Label 1 = fake, 0 = real.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub news: Vec<Sentence>,
    /// Chronological; each comment is its own list of sentences.
    pub comments: Vec<Vec<Sentence>>,
    pub entities: Vec<EntityMention>,
    pub label: u8,
}

/// On-disk record, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub label: u8,
    pub news: String,
    #[serde(default)]
    pub comments: Vec<String>,
    #[serde(default)]
    pub entities: Vec<RawEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEntity {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

impl RawRecord {
    pub fn into_document(self, line: usize) -> Result<Document> {
        if self.label > 1 {
            return Err(Error::Schema {
                line,
                detail: format!("label must be 0 or 1, got {}", self.label),
            });
        }
        let news = tokenize_text(&self.news);
        if news.is_empty() {
            return Err(Error::Schema {
                line,
                detail: "news text has no sentences".into(),
            });
        }
        Ok(Document {
            id: self.id,
            news,
            comments: self.comments.iter().map(|c| tokenize_text(c)).collect(),
            entities: self
                .entities
                .into_iter()
                .map(|e| EntityMention {
                    description: tokenize_text(&e.description),
                    name: e.name,
                })
                .collect(),
            label: self.label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadMode {
    /// Abort on the first malformed line.
    Strict,
    /// Skip malformed lines and collect warnings.
    Lenient,
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub documents: Vec<Document>,
    pub warnings: Vec<String>,
}

pub fn read_records(path: impl AsRef<Path>, mode: ReadMode) -> Result<(Vec<RawRecord>, Vec<String>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawRecord>(&line).map_err(|e| Error::Schema {
            line: line_no,
            detail: e.to_string(),
        });
        let checked = parsed.and_then(|r| {
            r.clone().into_document(line_no)?;
            Ok(r)
        });
        match (checked, mode) {
            (Ok(r), _) => records.push(r),
            (Err(e), ReadMode::Strict) => return Err(e),
            (Err(e), ReadMode::Lenient) => warnings.push(e.to_string()),
        }
    }
    Ok((records, warnings))
}

pub fn read_dataset(path: impl AsRef<Path>, mode: ReadMode) -> Result<ReadOutcome> {
    let (records, warnings) = read_records(path, mode)?;
    let documents = records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_document(i + 1))
        .collect::<Result<_>>()?;
    Ok(ReadOutcome {
        documents,
        warnings,
    })
}

pub fn write_records(path: impl AsRef<Path>, records: &[RawRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records always serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Stratified split into train/val/test with the given fractions for train
/// and val; test takes the rest.
pub fn stratified_split<T: Clone>(
    items: &[T],
    label: impl Fn(&T) -> u8,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..items.len()).filter(|&i| label(&items[i]) == class).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = (n as f64 * train_frac).round() as usize;
        let n_val = ((n as f64 * val_frac).round() as usize).min(n - n_train);
        for (k, &i) in idx.iter().enumerate() {
            let bucket = if k < n_train {
                &mut train
            } else if k < n_train + n_val {
                &mut val
            } else {
                &mut test
            };
            bucket.push(i);
        }
    }
    let pick = |mut ids: Vec<usize>| {
        ids.sort_unstable();
        ids.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    };
    (pick(train), pick(val), pick(test))
}
