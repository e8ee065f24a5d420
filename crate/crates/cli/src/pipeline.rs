//! Dataset files → encoded splits ready for the model.

use std::path::Path;

use dualcan_core::data::{
    build_vocabulary, encode_document, load_embeddings, read_dataset, stratified_split, Document,
    EmbeddingTable, EncodedDocument, EntityResolver, ReadMode, SnapshotResolver, Vocabulary,
};
use dualcan_core::model::Mode;
use dualcan_core::Error;

use crate::config::{DataSources, RunConfig};
use crate::error::CliResult;

pub const TRAIN_FRACTION: f64 = 0.7;
pub const VAL_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Splits<T> {
    pub fn all(&self) -> impl Iterator<Item = &T> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct Prepared {
    pub documents: Splits<Document>,
    pub encoded: Splits<EncodedDocument>,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingTable,
    pub warnings: Vec<String>,
}

fn read(path: &Path, lenient: bool, warnings: &mut Vec<String>) -> CliResult<Vec<Document>> {
    let mode = if lenient { ReadMode::Lenient } else { ReadMode::Strict };
    let out = read_dataset(path, mode)?;
    warnings.extend(out.warnings.into_iter().map(|w| format!("{}: {w}", path.display())));
    Ok(out.documents)
}

pub fn load_resolver(cfg: &RunConfig) -> CliResult<Option<SnapshotResolver>> {
    Ok(cfg.entities.as_deref().map(SnapshotResolver::load).transpose()?)
}

pub fn read_splits(cfg: &RunConfig, warnings: &mut Vec<String>) -> CliResult<Splits<Document>> {
    Ok(match &cfg.sources {
        DataSources::Single { path, split_seed } => {
            let docs = read(path, cfg.lenient, warnings)?;
            let (train, val, test) =
                stratified_split(&docs, |d| d.label, TRAIN_FRACTION, VAL_FRACTION, *split_seed);
            Splits { train, val, test }
        }
        DataSources::Split { train, val, test } => Splits {
            train: read(train, cfg.lenient, warnings)?,
            val: read(val, cfg.lenient, warnings)?,
            test: read(test, cfg.lenient, warnings)?,
        },
    })
}

/// Encodes `docs` with a vocabulary built from them. Embedding vectors are
/// looked up by token, so the encoded values do not depend on which other
/// documents share the vocabulary.
pub fn encode_all(
    docs: &[&Document],
    cfg: &RunConfig,
    resolver: Option<&SnapshotResolver>,
) -> CliResult<(Vocabulary, EmbeddingTable, Vec<EncodedDocument>)> {
    let resolver = resolver.map(|r| r as &dyn EntityResolver);
    let owned: Vec<Document> = docs.iter().map(|d| (*d).clone()).collect();
    let vocab = build_vocabulary(&owned, resolver, &cfg.hp);
    let embeddings = load_embeddings(&cfg.embeddings, &vocab, Some(cfg.hp.embedding_dim))?;
    let encoded = owned
        .iter()
        .map(|d| encode_document(d, &vocab, &cfg.hp, resolver))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok((vocab, embeddings, encoded))
}

pub fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let mut warnings = Vec::new();
    let documents = read_splits(cfg, &mut warnings)?;
    let resolver = load_resolver(cfg)?;
    let all: Vec<&Document> = documents.all().collect();
    let (vocab, embeddings, mut encoded) = encode_all(&all, cfg, resolver.as_ref())?;
    let test = encoded.split_off(documents.train.len() + documents.val.len());
    let val = encoded.split_off(documents.train.len());
    Ok(Prepared {
        encoded: Splits {
            train: encoded,
            val,
            test,
        },
        documents,
        vocab,
        embeddings,
        warnings,
    })
}

pub fn apply_mode(samples: &[EncodedDocument], mode: Mode) -> Vec<EncodedDocument> {
    samples.iter().map(|s| mode.apply(s)).collect()
}
