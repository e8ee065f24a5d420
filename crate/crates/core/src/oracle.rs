//! Explicit index-loop reference implementations used by tests.
//!
//! Nothing here touches [`crate::graph`]; values are computed with plain
//! nested loops over `Tensor` storage so they can check the graph path.

#![allow(clippy::needless_range_loop)]

use crate::data::{EmbeddingTable, EncodedBlock, EncodedDocument};
use crate::layers::{BiGruParams, CoAttentionParams, GruParams, LinearParams, WordAttentionParams};
use crate::model::{ModelParams, WordEncoderParams};
use crate::tensor::Tensor;

type Matrix = Vec<Vec<f64>>;

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Column-major view: `cols[t][i]`.
pub fn columns(t: &Tensor) -> Matrix {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..c).map(|j| (0..r).map(|i| t.get(i, j)).collect()).collect()
}

fn masked_softmax(scores: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let max = (0..scores.len())
        .filter(|&i| keep(i))
        .map(|i| scores[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = (0..scores.len())
        .map(|i| if keep(i) { (scores[i] - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

pub fn gru_cell(p: &GruParams<Tensor>, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hid = h.len();
    let gate = |w: &Tensor, u: &Tensor, b: &Tensor, hv: &[f64], i: usize| {
        let mut s = b.data()[i];
        for (j, xv) in x.iter().enumerate() {
            s += w.get(i, j) * xv;
        }
        for (j, hj) in hv.iter().enumerate() {
            s += u.get(i, j) * hj;
        }
        s
    };
    let r: Vec<f64> = (0..hid).map(|i| sig(gate(&p.w_r, &p.u_r, &p.b_r, h, i))).collect();
    let z: Vec<f64> = (0..hid).map(|i| sig(gate(&p.w_z, &p.u_z, &p.b_z, h, i))).collect();
    let rh: Vec<f64> = (0..hid).map(|i| r[i] * h[i]).collect();
    (0..hid)
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * gate(&p.w_h, &p.u_h, &p.b_h, &rh, i).tanh())
        .collect()
}

/// Returns output columns, each of length `2h`.
pub fn bigru(p: &BiGruParams<Tensor>, seq: &[Vec<f64>]) -> Matrix {
    let hid = p.fwd.u_r.shape()[0];
    let len = seq.len();
    let mut out = vec![Vec::with_capacity(2 * hid); len];
    let mut h = vec![0.0; hid];
    for t in 0..len {
        h = gru_cell(&p.fwd, &seq[t], &h);
        out[t].extend_from_slice(&h);
    }
    let mut h = vec![0.0; hid];
    let mut bwd = vec![Vec::new(); len];
    for t in (0..len).rev() {
        h = gru_cell(&p.bwd, &seq[t], &h);
        bwd[t] = h.clone();
    }
    for t in 0..len {
        out[t].extend_from_slice(&bwd[t]);
    }
    out
}

/// Returns `(pooled, alpha)`.
pub fn word_attention(
    p: &WordAttentionParams<Tensor>,
    v: &Tensor,
    mask: Option<&[bool]>,
) -> (Vec<f64>, Vec<f64>) {
    word_attention_cols(p, &columns(v), mask)
}

pub fn word_attention_cols(
    p: &WordAttentionParams<Tensor>,
    cols: &[Vec<f64>],
    mask: Option<&[bool]>,
) -> (Vec<f64>, Vec<f64>) {
    let hid = p.p.shape()[0];
    let scores: Vec<f64> = cols
        .iter()
        .map(|v| {
            let mut score = 0.0;
            for a in 0..hid {
                let mut k = p.b.data()[a];
                for (j, vj) in v.iter().enumerate() {
                    k += p.p.get(a, j) * vj;
                }
                score += p.u.data()[a] * k.tanh();
            }
            score
        })
        .collect();
    let alpha = masked_softmax(&scores, mask);
    let width = cols[0].len();
    let mut pooled = vec![0.0; width];
    for (t, v) in cols.iter().enumerate() {
        for i in 0..width {
            pooled[i] += alpha[t] * v[i];
        }
    }
    (pooled, alpha)
}

#[derive(Debug, Clone)]
pub struct CoAttention {
    /// Row-major `[E×N]`.
    pub affinity: Vec<f64>,
    pub attn_primary: Vec<f64>,
    pub attn_secondary: Vec<f64>,
    pub pooled_primary: Vec<f64>,
    pub pooled_secondary: Vec<f64>,
}

pub fn co_attention(
    p: &CoAttentionParams<Tensor>,
    s: &Tensor,
    d: &Tensor,
    mask_s: &[bool],
    mask_d: &[bool],
) -> CoAttention {
    co_attention_cols(p, &columns(s), &columns(d), mask_s, mask_d)
}

pub fn co_attention_cols(
    p: &CoAttentionParams<Tensor>,
    s: &[Vec<f64>],
    d: &[Vec<f64>],
    mask_s: &[bool],
    mask_d: &[bool],
) -> CoAttention {
    let w = s[0].len();
    let (n, e) = (s.len(), d.len());
    let apply = |m: &Tensor, v: &[f64]| -> Vec<f64> {
        (0..w).map(|i| (0..w).map(|j| m.get(i, j) * v[j]).sum()).collect()
    };

    // F[a][b] = tanh(Σ_ij D[i][a] W_r[i][j] S[j][b])
    let mut f = vec![vec![0.0; n]; e];
    for a in 0..e {
        for b in 0..n {
            let mut acc = 0.0;
            for i in 0..w {
                for j in 0..w {
                    acc += d[a][i] * p.w_r.get(i, j) * s[b][j];
                }
            }
            f[a][b] = acc.tanh();
        }
    }
    let ws: Vec<Vec<f64>> = s.iter().map(|c| apply(&p.w_s, c)).collect();
    let wd: Vec<Vec<f64>> = d.iter().map(|c| apply(&p.w_d, c)).collect();

    let score_s: Vec<f64> = (0..n)
        .map(|b| {
            (0..w)
                .map(|i| {
                    let carried: f64 = (0..e).map(|a| wd[a][i] * f[a][b]).sum();
                    p.w_hs.data()[i] * (ws[b][i] + carried).tanh()
                })
                .sum()
        })
        .collect();
    let score_d: Vec<f64> = (0..e)
        .map(|a| {
            (0..w)
                .map(|i| {
                    let carried: f64 = (0..n).map(|b| ws[b][i] * f[a][b]).sum();
                    p.w_hd.data()[i] * (wd[a][i] + carried).tanh()
                })
                .sum()
        })
        .collect();
    let attn_primary = masked_softmax(&score_s, Some(mask_s));
    let attn_secondary = masked_softmax(&score_d, Some(mask_d));
    let pool = |attn: &[f64], cols: &[Vec<f64>]| -> Vec<f64> {
        (0..w).map(|i| cols.iter().zip(attn).map(|(c, a)| a * c[i]).sum()).collect()
    };
    CoAttention {
        affinity: f.concat(),
        pooled_primary: pool(&attn_primary, s),
        pooled_secondary: pool(&attn_secondary, d),
        attn_primary,
        attn_secondary,
    }
}

pub fn linear(p: &LinearParams<Tensor>, x: &[f64]) -> Vec<f64> {
    let out = p.w.shape()[0];
    (0..out)
        .map(|i| p.b.data()[i] + x.iter().enumerate().map(|(j, v)| p.w.get(i, j) * v).sum::<f64>())
        .collect()
}

fn sentence_vectors(
    p: &WordEncoderParams<Tensor>,
    block: &EncodedBlock,
    emb: &EmbeddingTable,
) -> Matrix {
    (0..block.rows())
        .filter(|&i| block.lens[i] > 0)
        .map(|i| {
            let words: Matrix = block.sentence(i).iter().map(|&id| emb.row(id).to_vec()).collect();
            word_attention_cols(&p.attention, &bigru(&p.gru, &words), None).0
        })
        .collect()
}

fn padded(mut cols: Matrix, width: usize, rows: usize) -> Matrix {
    cols.resize(rows, vec![0.0; width]);
    cols
}

/// Full forward pass: `(logits, entity block, comment block)`.
pub fn model_forward(
    p: &ModelParams<Tensor>,
    doc: &EncodedDocument,
    emb: &EmbeddingTable,
) -> ([f64; 2], CoAttention, CoAttention) {
    let width = 2 * p.news_sentences.fwd.u_r.shape()[0];
    let news = bigru(&p.news_sentences, &sentence_vectors(&p.news_words, &doc.news, emb));
    let s = padded(news, width, doc.news.rows());
    let d = padded(sentence_vectors(&p.entity_words, &doc.entities, emb), width, doc.entities.rows());
    let c = padded(sentence_vectors(&p.comment_words, &doc.comments, emb), width, doc.comments.rows());
    let fallback = |m: Vec<bool>| if m.contains(&true) { m } else { vec![true; m.len()] };
    let ent = co_attention_cols(
        &p.entity_coattention,
        &s,
        &d,
        &doc.news.mask(),
        &fallback(doc.entities.mask()),
    );
    let com = co_attention_cols(
        &p.comment_coattention,
        &s,
        &c,
        &doc.news.mask(),
        &fallback(doc.comments.mask()),
    );
    let features = [
        ent.pooled_primary.clone(),
        ent.pooled_secondary.clone(),
        com.pooled_primary.clone(),
        com.pooled_secondary.clone(),
    ]
    .concat();
    let logits = linear(&p.output, &linear(&p.hidden, &features));
    ([logits[0], logits[1]], ent, com)
}

/// Cross-entropy of two logits against a 0/1 label, log clamped at 1e-12.
pub fn model_loss(logits: [f64; 2], label: u8) -> f64 {
    let probs = masked_softmax(&logits, None);
    -probs[usize::from(label)].max(1e-12).ln()
}

/// Random tiny inputs shared by property tests.
pub mod fixtures {
    use rand::Rng;

    use crate::data::{EmbeddingTable, EncodedBlock, EncodedDocument, PAD_ID};
    use crate::hparams::{HyperParams, Profile};

    /// h=2, M=3, N=E=U=2, d=3.
    pub fn tiny_hparams() -> HyperParams {
        HyperParams {
            embedding_dim: 3,
            hidden_dim: 2,
            max_words: 3,
            max_news_sentences: 2,
            max_entity_sentences: 2,
            max_comment_sentences: 2,
            sentences_per_entity: 2,
            sentences_per_comment: 2,
            batch_size: 4,
            ..HyperParams::profile(Profile::Desk)
        }
    }

    /// Rows 0 and 1 (`<PAD>`, `<OOV>`) are zero, the rest uniform in ±1.
    pub fn random_embeddings(rng: &mut impl Rng, vocab_len: usize, dim: usize) -> EmbeddingTable {
        let mut table = EmbeddingTable::zeros(vocab_len, dim);
        for id in 2..vocab_len as u32 {
            let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            table.set_row(id, &row);
        }
        table
    }

    /// `real` leading rows with 1..=width random ids in `1..vocab_len`.
    pub fn random_block(
        rng: &mut impl Rng,
        rows: usize,
        width: usize,
        real: usize,
        vocab_len: usize,
    ) -> EncodedBlock {
        let mut block = EncodedBlock {
            width,
            ids: vec![PAD_ID; rows * width],
            lens: vec![0; rows],
        };
        for r in 0..real.min(rows) {
            let len = rng.gen_range(1..=width);
            for c in 0..len {
                block.ids[r * width + c] = rng.gen_range(1..vocab_len as u32);
            }
            block.lens[r] = len;
        }
        block
    }

    /// News has at least one real sentence; sides may be empty.
    pub fn random_document(
        rng: &mut impl Rng,
        hp: &HyperParams,
        vocab_len: usize,
    ) -> EncodedDocument {
        let m = hp.max_words;
        let n_news = rng.gen_range(1..=hp.max_news_sentences);
        let n_ent = rng.gen_range(0..=hp.max_entity_sentences);
        let n_com = rng.gen_range(0..=hp.max_comment_sentences);
        EncodedDocument {
            id: format!("r{}", rng.gen::<u32>()),
            label: rng.gen_range(0..2),
            news: random_block(rng, hp.max_news_sentences, m, n_news, vocab_len),
            entities: random_block(rng, hp.max_entity_sentences, m, n_ent, vocab_len),
            comments: random_block(rng, hp.max_comment_sentences, m, n_com, vocab_len),
        }
    }
}
