use super::dataset::{Document, Sentence};
use super::entities::{resolve_entities, EntityResolver};
use super::vocab::{Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::hparams::HyperParams;

/// A padded `[rows×width]` id block. `lens[i]` is the number of real tokens
/// in row `i`; zero marks a pad sentence. Real rows always form a prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedBlock {
    pub width: usize,
    pub ids: Vec<u32>,
    pub lens: Vec<usize>,
}

impl EncodedBlock {
    pub fn empty(rows: usize, width: usize) -> Self {
        Self {
            width,
            ids: vec![PAD_ID; rows * width],
            lens: vec![0; rows],
        }
    }

    fn from_sentences(sentences: &[Sentence], rows: usize, width: usize, vocab: &Vocabulary) -> Self {
        let mut block = Self::empty(rows, width);
        for (r, sentence) in sentences.iter().filter(|s| !s.is_empty()).take(rows).enumerate() {
            let n = sentence.len().min(width);
            for (c, tok) in sentence.iter().take(n).enumerate() {
                block.ids[r * width + c] = vocab.id(tok);
            }
            block.lens[r] = n;
        }
        block
    }

    pub fn rows(&self) -> usize {
        self.lens.len()
    }

    /// Real tokens of row `i`.
    pub fn sentence(&self, i: usize) -> &[u32] {
        &self.ids[i * self.width..i * self.width + self.lens[i]]
    }

    pub fn mask(&self) -> Vec<bool> {
        self.lens.iter().map(|&l| l > 0).collect()
    }

    pub fn real_rows(&self) -> usize {
        self.lens.iter().filter(|&&l| l > 0).count()
    }

    /// Every token replaced by `<PAD>`.
    pub fn blanked(&self) -> Self {
        Self::empty(self.rows(), self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDocument {
    pub id: String,
    pub label: u8,
    /// `[N×M]`
    pub news: EncodedBlock,
    /// `[E×M]`
    pub entities: EncodedBlock,
    /// `[U×M]`
    pub comments: EncodedBlock,
}

/// Comment sentences in chronological order, at most `sentences_per_comment`
/// from each comment, cut to `max_comment_sentences`.
pub fn pool_comments(doc: &Document, hp: &HyperParams) -> Vec<Sentence> {
    let mut out: Vec<Sentence> = doc
        .comments
        .iter()
        .flat_map(|c| c.iter().filter(|s| !s.is_empty()).take(hp.sentences_per_comment).cloned())
        .take(hp.max_comment_sentences)
        .collect();
    out.truncate(hp.max_comment_sentences);
    out
}

/// Pads and truncates a document to the fixed `N/E/U × M` blocks.
pub fn encode_document(
    doc: &Document,
    vocab: &Vocabulary,
    hp: &HyperParams,
    resolver: Option<&dyn EntityResolver>,
) -> Result<EncodedDocument> {
    let news = EncodedBlock::from_sentences(&doc.news, hp.max_news_sentences, hp.max_words, vocab);
    if news.real_rows() == 0 {
        return Err(Error::DegenerateInput(format!("document {} has no news sentences", doc.id)));
    }
    let descriptions = resolve_entities(doc, resolver, hp);
    let comments = pool_comments(doc, hp);
    Ok(EncodedDocument {
        id: doc.id.clone(),
        label: doc.label,
        news,
        entities: EncodedBlock::from_sentences(
            &descriptions,
            hp.max_entity_sentences,
            hp.max_words,
            vocab,
        ),
        comments: EncodedBlock::from_sentences(
            &comments,
            hp.max_comment_sentences,
            hp.max_words,
            vocab,
        ),
    })
}

/// Every token a document can contribute after resolution, in a fixed order.
pub fn document_tokens(
    doc: &Document,
    resolver: Option<&dyn EntityResolver>,
    hp: &HyperParams,
) -> Vec<String> {
    let mut out = Vec::new();
    for s in &doc.news {
        out.extend(s.iter().cloned());
    }
    for s in resolve_entities(doc, resolver, hp) {
        out.extend(s);
    }
    for s in pool_comments(doc, hp) {
        out.extend(s);
    }
    out
}

pub fn build_vocabulary(
    docs: &[Document],
    resolver: Option<&dyn EntityResolver>,
    hp: &HyperParams,
) -> Vocabulary {
    let mut vocab = Vocabulary::new();
    for d in docs {
        for t in document_tokens(d, resolver, hp) {
            vocab.insert(&t);
        }
    }
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::EntityMention;
    use crate::hparams::Profile;

    fn words(n: usize, tag: &str) -> Sentence {
        (0..n).map(|i| format!("{tag}{i}")).collect()
    }

    fn sample() -> Document {
        Document {
            id: "a".into(),
            news: vec![words(125, "w"), words(3, "v")],
            comments: vec![vec![words(2, "c"), words(2, "d"), words(2, "e")]],
            entities: vec![EntityMention {
                name: "x".into(),
                description: vec![words(4, "x")],
            }],
            label: 1,
        }
    }

    #[test]
    fn truncates_long_sentence_to_max_words() {
        let hp = HyperParams::profile(Profile::GossipCop);
        let doc = sample();
        let vocab = build_vocabulary(std::slice::from_ref(&doc), None, &hp);
        let enc = encode_document(&doc, &vocab, &hp, None).unwrap();
        assert_eq!(enc.news.lens[0], 120);
        assert_eq!(enc.news.sentence(0).last(), Some(&vocab.id("w119")));
        assert_eq!(enc.news.mask().iter().filter(|&&m| m).count(), 2);
        // two sentences per comment
        assert_eq!(enc.comments.real_rows(), 2);
    }

    #[test]
    fn empty_comments_give_all_pad_block() {
        let hp = HyperParams::profile(Profile::CoAid);
        let mut doc = sample();
        doc.comments.clear();
        let vocab = build_vocabulary(&[doc.clone()], None, &hp);
        let enc = encode_document(&doc, &vocab, &hp, None).unwrap();
        assert!(enc.comments.ids.iter().all(|&i| i == PAD_ID));
        assert!(enc.comments.mask().iter().all(|&m| !m));
    }

    #[test]
    fn no_news_is_degenerate() {
        let hp = HyperParams::profile(Profile::CoAid);
        let mut doc = sample();
        doc.news.clear();
        let vocab = Vocabulary::new();
        assert!(matches!(
            encode_document(&doc, &vocab, &hp, None),
            Err(Error::DegenerateInput(_))
        ));
    }
}
