use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hparams::HyperParams;
use crate::layers::{
    param_tree, BiGruParams, CoAttentionParams, LinearParams, ParamTree, WordAttentionParams,
};
use crate::tensor::Tensor;

/// Word-level encoder: BiGRU over embeddings followed by additive attention.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEncoderParams<T> {
    pub gru: BiGruParams<T>,
    pub attention: WordAttentionParams<T>,
}

param_tree!(WordEncoderParams { leaves: [], groups: [gru, attention] });

impl WordEncoderParams<Tensor> {
    pub fn init(embedding_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            gru: BiGruParams::init(embedding_dim, hidden, rng),
            attention: WordAttentionParams::init(hidden, rng),
        }
    }
}

/// Every learnable tensor of the network. Embeddings are not part of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub news_words: WordEncoderParams<T>,
    pub news_sentences: BiGruParams<T>,
    pub entity_words: WordEncoderParams<T>,
    pub comment_words: WordEncoderParams<T>,
    pub entity_coattention: CoAttentionParams<T>,
    pub comment_coattention: CoAttentionParams<T>,
    /// `W_1 [2h×8h]`, `b_1 [2h]`.
    pub hidden: LinearParams<T>,
    /// `W_2 [2×2h]`, `b_2 [2]`.
    pub output: LinearParams<T>,
}

param_tree!(ModelParams {
    leaves: [],
    groups: [
        news_words,
        news_sentences,
        entity_words,
        comment_words,
        entity_coattention,
        comment_coattention,
        hidden,
        output,
    ]
});

impl ModelParams<Tensor> {
    /// Uniform(±1/√fan_in) weights, zero biases, drawn from `seed`.
    pub fn init(hp: &HyperParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, h, w) = (hp.embedding_dim, hp.hidden_dim, hp.width());
        Self {
            news_words: WordEncoderParams::init(d, h, &mut rng),
            news_sentences: BiGruParams::init(w, h, &mut rng),
            entity_words: WordEncoderParams::init(d, h, &mut rng),
            comment_words: WordEncoderParams::init(d, h, &mut rng),
            entity_coattention: CoAttentionParams::init(w, &mut rng),
            comment_coattention: CoAttentionParams::init(w, &mut rng),
            hidden: LinearParams::init(4 * w, w, &mut rng),
            output: LinearParams::init(w, 2, &mut rng),
        }
    }

    pub fn count(&self) -> usize {
        self.leaves().iter().map(|t| t.numel()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hparams::Profile;

    #[test]
    fn shapes_follow_hyperparameters() {
        let hp = HyperParams::profile(Profile::Desk);
        let p = ModelParams::init(&hp, 1);
        assert_eq!(p.hidden.w.shape(), &[32, 128]);
        assert_eq!(p.output.w.shape(), &[2, 32]);
        assert_eq!(p.news_words.attention.p.shape(), &[16, 32]);
        assert_eq!(p.news_sentences.fwd.w_r.shape(), &[16, 32]);
        assert_eq!(p.entity_coattention.w_r.shape(), &[32, 32]);
        assert!(p.output.b.data().iter().all(|&v| v == 0.0));
        let names = p.names();
        assert_eq!(names[0], "news_words.gru.fwd.w_r");
        assert_eq!(names.last().unwrap(), "output.b");
    }

    #[test]
    fn init_is_seeded() {
        let hp = HyperParams::profile(Profile::Desk);
        assert_eq!(ModelParams::init(&hp, 3), ModelParams::init(&hp, 3));
        assert_ne!(ModelParams::init(&hp, 3), ModelParams::init(&hp, 4));
    }
}
