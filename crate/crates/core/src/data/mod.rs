//! Corpus ingestion: text splitting, vocabulary, embeddings, entity
//! descriptions, padding, and synthetic corpora.

mod dataset;
mod embeddings;
mod encode;
mod entities;
pub mod synth;
mod text;
mod vocab;

pub use dataset::{
    read_dataset, read_records, stratified_split, write_records, Document, EntityMention,
    RawEntity, RawRecord, ReadMode, ReadOutcome, Sentence,
};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use encode::{
    build_vocabulary, document_tokens, encode_document, pool_comments, EncodedBlock,
    EncodedDocument,
};
pub use entities::{normalize_name, resolve_entities, EntityResolver, SnapshotResolver};
pub use text::{split_sentences, tokenize, tokenize_text};
pub use vocab::{Vocabulary, OOV_ID, OOV_TOKEN, PAD_ID, PAD_TOKEN};
