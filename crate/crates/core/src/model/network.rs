//! Forward pass of the full network and the classification loss.

use serde::{Deserialize, Serialize};

use super::params::{ModelParams, WordEncoderParams};
use crate::data::{EmbeddingTable, EncodedBlock, EncodedDocument};
use crate::error::{Error, Result};
use crate::graph::{Axis, Graph, Var};
use crate::layers::{bigru, co_attention, linear, register, word_attention, CoAttentionOutput};
use crate::tensor::Tensor;

/// Clamp applied inside the log of the loss.
pub const LOG_FLOOR: f64 = 1e-12;

/// Word-level encoding of one sentence: `[2h×1]` pooled vector.
fn encode_sentence(
    g: &mut Graph,
    ids: &[u32],
    emb: &EmbeddingTable,
    p: &WordEncoderParams<Var>,
) -> Result<Var> {
    let x = g.constant(emb.sentence_matrix(ids));
    let states = bigru(g, x, &p.gru)?;
    let (pooled, _) = word_attention(g, states, None, &p.attention)?;
    Ok(pooled)
}

fn pad_columns(g: &mut Graph, real: Var, width: usize, total: usize) -> Result<Var> {
    let have = g.value(real).cols();
    if have >= total {
        return Ok(real);
    }
    let pad = g.constant(Tensor::zeros(&[width, total - have]));
    g.concat(&[real, pad], Axis::Cols)
}

/// News encoder: word-level attention per sentence, then a sentence-level
/// BiGRU over the real sentences. Pad sentences become zero columns.
/// Returns `S [2h×N]` and its sentence mask.
pub fn encode_news(
    g: &mut Graph,
    block: &EncodedBlock,
    emb: &EmbeddingTable,
    p: &ModelParams<Var>,
) -> Result<(Var, Vec<bool>)> {
    let real = block.real_rows();
    if real == 0 {
        return Err(Error::DegenerateInput("news block has no real sentences".into()));
    }
    let width = g.value(p.news_sentences.fwd.w_r).cols();
    let vectors = (0..real)
        .map(|i| encode_sentence(g, block.sentence(i), emb, &p.news_words))
        .collect::<Result<Vec<_>>>()?;
    let seq = g.concat(&vectors, Axis::Cols)?;
    let encoded = bigru(g, seq, &p.news_sentences)?;
    let padded = pad_columns(g, encoded, width, block.rows())?;
    Ok((padded, block.mask()))
}

/// Side encoder (entity descriptions or comments): word-level attention per
/// sentence only. A block without real sentences yields all-zero columns
/// and an all-false mask.
pub fn encode_side(
    g: &mut Graph,
    block: &EncodedBlock,
    emb: &EmbeddingTable,
    p: &WordEncoderParams<Var>,
) -> Result<(Var, Vec<bool>)> {
    let width = 2 * g.value(p.gru.fwd.u_r).rows();
    let real = block.real_rows();
    if real == 0 {
        let zeros = g.constant(Tensor::zeros(&[width, block.rows()]));
        return Ok((zeros, block.mask()));
    }
    let vectors = (0..real)
        .map(|i| encode_sentence(g, block.sentence(i), emb, p))
        .collect::<Result<Vec<_>>>()?;
    let seq = g.concat(&vectors, Axis::Cols)?;
    let padded = pad_columns(g, seq, width, block.rows())?;
    Ok((padded, block.mask()))
}

/// All-false masks fall back to uniform attention over every position.
fn effective_mask(mask: &[bool]) -> Vec<bool> {
    if mask.iter().any(|&m| m) {
        mask.to_vec()
    } else {
        vec![true; mask.len()]
    }
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[2×1]` unnormalised class scores (index 1 = fake).
    pub logits: Var,
    pub entity: CoAttentionOutput,
    pub comment: CoAttentionOutput,
    pub news_mask: Vec<bool>,
    pub entity_mask: Vec<bool>,
    pub comment_mask: Vec<bool>,
}

pub fn forward(
    g: &mut Graph,
    sample: &EncodedDocument,
    emb: &EmbeddingTable,
    p: &ModelParams<Var>,
) -> Result<ForwardOutput> {
    let (news, news_mask) = encode_news(g, &sample.news, emb, p)?;
    let (entities, entity_mask) = encode_side(g, &sample.entities, emb, &p.entity_words)?;
    let (comments, comment_mask) = encode_side(g, &sample.comments, emb, &p.comment_words)?;

    let entity = co_attention(
        g,
        news,
        entities,
        &news_mask,
        &effective_mask(&entity_mask),
        &p.entity_coattention,
    )?;
    let comment = co_attention(
        g,
        news,
        comments,
        &news_mask,
        &effective_mask(&comment_mask),
        &p.comment_coattention,
    )?;

    let features = g.concat(
        &[
            entity.pooled_primary,
            entity.pooled_secondary,
            comment.pooled_primary,
            comment.pooled_secondary,
        ],
        Axis::Cols,
    )?;
    let features = g.transpose(features)?;
    let hidden = linear(g, features, &p.hidden)?;
    let logits = linear(g, hidden, &p.output)?;
    Ok(ForwardOutput {
        logits,
        entity,
        comment,
        news_mask,
        entity_mask,
        comment_mask,
    })
}

/// `L = −y·log p₁ − (1−y)·log p₀` with `p = softmax(logits)`.
pub fn loss(g: &mut Graph, logits: Var, label: u8) -> Result<Var> {
    if label > 1 {
        return Err(Error::Contract(format!("label must be 0 or 1, got {label}")));
    }
    let y = f64::from(label);
    let row = g.transpose(logits)?;
    let probs = g.softmax_row(row, None)?;
    let p0 = g.slice_cols(probs, 0, 1)?;
    let p1 = g.slice_cols(probs, 1, 2)?;
    let p0 = g.clamp_min(p0, LOG_FLOOR)?;
    let p1 = g.clamp_min(p1, LOG_FLOOR)?;
    let log_p0 = g.log(p0)?;
    let log_p1 = g.log(p1)?;
    let fake_term = g.scale(log_p1, -y)?;
    let real_term = g.scale(log_p0, -(1.0 - y))?;
    g.add(fake_term, real_term)
}

/// Per-sample attention distributions for interpretability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    /// News attention from the entity co-attention block.
    pub a_s1: Vec<f64>,
    pub a_d: Vec<f64>,
    /// News attention from the comment co-attention block.
    pub a_s2: Vec<f64>,
    pub a_c: Vec<f64>,
    pub news_mask: Vec<bool>,
    pub entity_mask: Vec<bool>,
    pub comment_mask: Vec<bool>,
}

impl AttentionReport {
    pub fn from_forward(g: &Graph, out: &ForwardOutput) -> Self {
        let row = |v: Var| g.value(v).data().to_vec();
        Self {
            a_s1: row(out.entity.attn_primary),
            a_d: row(out.entity.attn_secondary),
            a_s2: row(out.comment.attn_primary),
            a_c: row(out.comment.attn_secondary),
            news_mask: out.news_mask.clone(),
            entity_mask: out.entity_mask.clone(),
            comment_mask: out.comment_mask.clone(),
        }
    }
}

/// Softmax of two logits.
pub fn probabilities(logits: &[f64]) -> [f64; 2] {
    let max = logits[0].max(logits[1]);
    let e0 = (logits[0] - max).exp();
    let e1 = (logits[1] - max).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

/// Argmax; an exact tie predicts 0 (real).
pub fn decide(probs: [f64; 2]) -> u8 {
    u8::from(probs[1] > probs[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub label: u8,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
    pub pred: u8,
    pub loss: f64,
    pub attention: AttentionReport,
}

/// Runs one sample through a fresh graph.
pub fn predict(
    params: &ModelParams<Tensor>,
    sample: &EncodedDocument,
    emb: &EmbeddingTable,
) -> Result<Prediction> {
    let mut g = Graph::new();
    let pv = register(&mut g, params);
    let out = forward(&mut g, sample, emb, &pv)?;
    let l = loss(&mut g, out.logits, sample.label)?;
    let lv = g.value(out.logits).data();
    let logits = [lv[0], lv[1]];
    let probs = probabilities(&logits);
    Ok(Prediction {
        id: sample.id.clone(),
        label: sample.label,
        logits,
        probs,
        pred: decide(probs),
        loss: g.value(l).item(),
        attention: AttentionReport::from_forward(&g, &out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_loss(logits: [f64; 2], y: u8) -> f64 {
        let mut g = Graph::new();
        let l = g.constant(Tensor::column(logits.to_vec()).unwrap());
        let out = loss(&mut g, l, y).unwrap();
        g.value(out).item()
    }

    #[test]
    fn loss_values() {
        assert!((scalar_loss([0.0, 0.0], 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(scalar_loss([-30.0, 30.0], 1) < 1e-20);
        // −log(e/(e + e⁻¹))
        let expected = -(1f64.exp() / (1f64.exp() + (-1f64).exp())).ln();
        assert!((scalar_loss([1.0, -1.0], 0) - expected).abs() < 1e-15);
        assert!((expected - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn loss_is_clamped() {
        let v = scalar_loss([0.0, -800.0], 1);
        assert!((v + LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn tie_predicts_real() {
        assert_eq!(decide([0.5, 0.5]), 0);
        assert_eq!(decide(probabilities(&[0.0, 1e-9])), 1);
    }
}
