use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualcan_core::data::{EmbeddingTable, EncodedDocument, PAD_ID};
use dualcan_core::gradcheck::{grad_check, GradCheckConfig};
use dualcan_core::layers::{register, ParamTree};
use dualcan_core::model::{
    forward, loss, predict, train, Adam, Mode, ModelParams, Trainer,
};
use dualcan_core::oracle::{self, fixtures};
use dualcan_core::{Graph, HyperParams, Tensor, Var};

const VOCAB: usize = 10;

fn setup(seed: u64) -> (HyperParams, EmbeddingTable, ModelParams<Tensor>, ChaCha8Rng) {
    let hp = fixtures::tiny_hparams();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emb = fixtures::random_embeddings(&mut rng, VOCAB, hp.embedding_dim);
    let params = ModelParams::init(&hp, seed);
    (hp, emb, params, rng)
}

fn logits(params: &ModelParams<Tensor>, doc: &EncodedDocument, emb: &EmbeddingTable) -> [f64; 2] {
    predict(params, doc, emb).unwrap().logits
}

#[test]
fn forward_matches_composed_loop_oracle() {
    let (hp, emb, params, mut rng) = setup(1);
    for _ in 0..50 {
        let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
        let got = predict(&params, &doc, &emb).unwrap();
        let (expected, ent, com) = oracle::model_forward(&params, &doc, &emb);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(&got.logits, &expected));
        assert!(close(&got.attention.a_s1, &ent.attn_primary));
        assert!(close(&got.attention.a_d, &ent.attn_secondary));
        assert!(close(&got.attention.a_s2, &com.attn_primary));
        assert!(close(&got.attention.a_c, &com.attn_secondary));
        assert!((got.loss - oracle::model_loss(expected, doc.label)).abs() < 1e-12);
    }
}

fn rebuild(template: &ModelParams<Tensor>, vars: &[Var]) -> ModelParams<Var> {
    let mut i = 0;
    template.map(|_| {
        i += 1;
        vars[i - 1]
    })
}

#[test]
fn end_to_end_gradients_match_finite_differences() {
    let (hp, emb, params, mut rng) = setup(2);
    let docs: Vec<EncodedDocument> = (0..3)
        .map(|_| fixtures::random_document(&mut rng, &hp, VOCAB))
        .collect();
    let leaves: Vec<Tensor> = params.leaves().into_iter().cloned().collect();
    let f = |g: &mut Graph, vars: &[Var]| {
        let p = rebuild(&params, vars);
        let mut total = None;
        for d in &docs {
            let out = forward(g, d, &emb, &p)?;
            let l = loss(g, out.logits, d.label)?;
            total = Some(match total {
                None => l,
                Some(acc) => g.add(acc, l)?,
            });
        }
        g.scale(total.unwrap(), 1.0 / docs.len() as f64)
    };
    let cfg = GradCheckConfig {
        step: 1e-4,
        tol: 1e-4,
        abs_floor: 1e-7,
        samples_per_tensor: usize::MAX,
        seed: 0,
    };
    let report = grad_check(f, &leaves, &cfg).unwrap();
    let names = params.names();
    for p in &report.params {
        assert!(
            p.max_error <= 1e-4,
            "{}: error {} at {} (analytic {}, numeric {})",
            names[p.param],
            p.max_error,
            p.worst_coord,
            p.analytic,
            p.numeric
        );
    }
    assert!(report.passed());
}

fn unmasked_sum(weights: &[f64], mask: &[bool]) -> f64 {
    if mask.iter().any(|&m| m) {
        weights.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| w).sum()
    } else {
        weights.iter().sum()
    }
}

#[test]
fn attention_vectors_are_normalised() {
    let (hp, emb, params, mut rng) = setup(3);
    for _ in 0..200 {
        let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
        let a = predict(&params, &doc, &emb).unwrap().attention;
        for (w, m) in [
            (&a.a_s1, &a.news_mask),
            (&a.a_d, &a.entity_mask),
            (&a.a_s2, &a.news_mask),
            (&a.a_c, &a.comment_mask),
        ] {
            assert!((unmasked_sum(w, m) - 1.0).abs() < 1e-10);
            if m.iter().any(|&x| x) {
                for (wi, mi) in w.iter().zip(m.iter()) {
                    if !mi {
                        assert_eq!(*wi, 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn pad_positions_are_inert() {
    let (hp, emb, params, mut rng) = setup(4);
    for _ in 0..50 {
        let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
        let base = logits(&params, &doc, &emb);
        let mut noisy = doc.clone();
        for block in [&mut noisy.news, &mut noisy.entities, &mut noisy.comments] {
            for r in 0..block.rows() {
                for c in block.lens[r]..block.width {
                    block.ids[r * block.width + c] = rng.gen_range(2..VOCAB as u32);
                }
            }
        }
        assert_eq!(logits(&params, &noisy, &emb), base);
    }
}

fn append_pad_rows(block: &mut dualcan_core::data::EncodedBlock, extra: usize) {
    block.ids.extend(std::iter::repeat_n(PAD_ID, extra * block.width));
    block.lens.extend(std::iter::repeat_n(0, extra));
}

#[test]
fn appending_pad_sentences_keeps_logits() {
    let (hp, emb, params, mut rng) = setup(5);
    for _ in 0..50 {
        let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
        let base = logits(&params, &doc, &emb);
        let mut longer = doc.clone();
        append_pad_rows(&mut longer.news, 2);
        append_pad_rows(&mut longer.entities, 3);
        append_pad_rows(&mut longer.comments, 1);
        let got = logits(&params, &longer, &emb);
        for k in 0..2 {
            assert!((got[k] - base[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn entity_order_does_not_matter() {
    let hp = HyperParams {
        max_entity_sentences: 4,
        ..fixtures::tiny_hparams()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let emb = fixtures::random_embeddings(&mut rng, VOCAB, hp.embedding_dim);
    let params = ModelParams::init(&hp, 6);
    for _ in 0..50 {
        let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
        let real = doc.entities.real_rows();
        let mut perm: Vec<usize> = (0..real).collect();
        perm.reverse();
        let mut shuffled = doc.clone();
        let w = doc.entities.width;
        for (dst, &src) in perm.iter().enumerate() {
            shuffled.entities.ids[dst * w..(dst + 1) * w]
                .copy_from_slice(&doc.entities.ids[src * w..(src + 1) * w]);
            shuffled.entities.lens[dst] = doc.entities.lens[src];
        }
        let a = logits(&params, &doc, &emb);
        let b = logits(&params, &shuffled, &emb);
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_output_layer_gives_even_odds() {
    let (hp, emb, mut params, mut rng) = setup(7);
    params.output = params.output.map(|t| Tensor::zeros(t.shape()));
    let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
    let p = predict(&params, &doc, &emb).unwrap();
    assert_eq!(p.logits, [0.0, 0.0]);
    assert_eq!(p.probs, [0.5, 0.5]);
    assert_eq!(p.pred, 0);
    assert!((p.loss - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn zero_inputs_and_parameters_encode_to_zero() {
    let (hp, _, params, mut rng) = setup(8);
    let zero = params.map(|t| Tensor::zeros(t.shape()));
    let emb = EmbeddingTable::zeros(VOCAB, hp.embedding_dim);
    let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
    let mut g = Graph::new();
    let pv = register(&mut g, &zero);
    let (s, mask) = dualcan_core::model::encode_news(&mut g, &doc.news, &emb, &pv).unwrap();
    assert!(g.value(s).data().iter().all(|&x| x == 0.0));
    assert_eq!(mask, doc.news.mask());
}

#[test]
fn single_word_news_fills_first_column() {
    let (hp, emb, params, mut rng) = setup(9);
    let mut doc = fixtures::random_document(&mut rng, &hp, VOCAB);
    doc.news = fixtures::random_block(&mut rng, hp.max_news_sentences, hp.max_words, 1, VOCAB);
    doc.news.lens[0] = 1;
    let p = predict(&params, &doc, &emb).unwrap();
    assert_eq!(p.attention.news_mask, vec![true, false]);
    assert_eq!(p.attention.a_s1, vec![1.0, 0.0]);
}

#[test]
fn removed_entities_pool_to_the_fallback_vector() {
    let (hp, emb, params, mut rng) = setup(10);
    for _ in 0..10 {
        let doc = Mode::NewsComments.apply(&fixtures::random_document(&mut rng, &hp, VOCAB));
        assert!(doc.entities.ids.iter().all(|&id| id == PAD_ID));
        let mut g = Graph::new();
        let pv = register(&mut g, &params);
        let out = forward(&mut g, &doc, &emb, &pv).unwrap();
        assert!(g.value(out.entity.pooled_secondary).data().iter().all(|&x| x == 0.0));
        let a_d = g.value(out.entity.attn_secondary).data().to_vec();
        assert_eq!(a_d, vec![0.5, 0.5]);
    }
    let doc = fixtures::random_document(&mut rng, &hp, VOCAB);
    assert_eq!(Mode::Full.apply(&doc), doc);
}

#[test]
fn adam_follows_hand_run_trajectory() {
    // f(x) = x², x₀ = 1, lr = 0.1, written out step by step
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
    let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    let mut expected = Vec::new();
    for t in 1..=3 {
        let g = 2.0 * x;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        x -= lr * m_hat / (v_hat.sqrt() + eps);
        expected.push(x);
    }
    assert!((expected[0] - 0.9000000005).abs() < 1e-12);
    assert!((expected[1] - 0.8004122286917927).abs() < 1e-12);
    assert!((expected[2] - 0.70158627294603).abs() < 1e-12);

    let mut param = Tensor::scalar(1.0).unwrap();
    let mut adam = Adam::new([&param]);
    for want in expected {
        let mut g = Graph::new();
        let xv = g.param(param.clone());
        let sq = g.mul(xv, xv).unwrap();
        let l = g.sum(sq).unwrap();
        g.backward(l).unwrap();
        let grad = g.grad(xv).unwrap().clone();
        adam.step(&mut [&mut param], &[grad], lr).unwrap();
        assert!((param.item() - want).abs() < 1e-15);
    }
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut p = Tensor::column(vec![0.3, -0.7]).unwrap();
    let before = p.clone();
    let mut adam = Adam::new([&p]);
    adam.step(&mut [&mut p], &[Tensor::zeros(&[2, 1])], 0.1).unwrap();
    assert_eq!(p, before);
}

#[test]
fn zero_learning_rate_keeps_parameters_and_runs_are_repeatable() {
    let (hp, emb, params, mut rng) = setup(11);
    let docs: Vec<EncodedDocument> = (0..8)
        .map(|i| {
            let mut d = fixtures::random_document(&mut rng, &hp, VOCAB);
            d.label = (i % 2) as u8;
            d
        })
        .collect();
    let frozen = HyperParams {
        learning_rate: 0.0,
        max_epochs: 3,
        ..hp.clone()
    };
    let out = train(params.clone(), &docs[..6], &docs[6..], &emb, &frozen, |_| {}).unwrap();
    assert_eq!(out.best, params);

    let moving = HyperParams {
        learning_rate: 0.01,
        max_epochs: 3,
        ..hp
    };
    let a = train(params.clone(), &docs[..6], &docs[6..], &emb, &moving, |_| {}).unwrap();
    let b = train(params.clone(), &docs[..6], &docs[6..], &emb, &moving, |_| {}).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.best, b.best);
    assert_ne!(a.best, params);
}

#[test]
fn training_steps_reduce_loss() {
    let (hp, emb, params, mut rng) = setup(12);
    let docs: Vec<EncodedDocument> = (0..4)
        .map(|_| fixtures::random_document(&mut rng, &hp, VOCAB))
        .collect();
    let batch: Vec<&EncodedDocument> = docs.iter().collect();
    let hp = HyperParams {
        learning_rate: 0.01,
        ..hp
    };
    let mut trainer = Trainer::new(params, &emb, &hp);
    let first = trainer.step(&batch).unwrap().loss;
    let mut last = first;
    for _ in 0..100 {
        last = trainer.step(&batch).unwrap().loss;
    }
    assert!(last < first * 0.5, "{first} -> {last}");
}
