//! Model and training hyperparameters, with the published dataset profiles.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    /// Word embedding dimension `d`.
    pub embedding_dim: usize,
    /// GRU hidden size `h`; encoder outputs have width `2h`.
    pub hidden_dim: usize,
    /// `M`, tokens kept per sentence.
    pub max_words: usize,
    /// `N`, news sentences kept.
    pub max_news_sentences: usize,
    /// `E`, entity-description sentences kept in total.
    pub max_entity_sentences: usize,
    /// `U`, comment sentences kept in total.
    pub max_comment_sentences: usize,
    pub sentences_per_entity: usize,
    pub sentences_per_comment: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    GossipCop,
    CoAid,
    /// Small dimensions for synthetic corpora and tests.
    Desk,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gossipcop" => Ok(Profile::GossipCop),
            "coaid" => Ok(Profile::CoAid),
            "desk" => Ok(Profile::Desk),
            other => Err(Error::Contract(format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::GossipCop => "gossipcop",
            Profile::CoAid => "coaid",
            Profile::Desk => "desk",
        })
    }
}

impl HyperParams {
    pub fn profile(profile: Profile) -> Self {
        let base = Self {
            embedding_dim: 100,
            hidden_dim: 100,
            max_words: 120,
            max_news_sentences: 40,
            max_entity_sentences: 100,
            max_comment_sentences: 100,
            sentences_per_entity: 4,
            sentences_per_comment: 2,
            batch_size: 16,
            learning_rate: 0.001,
            max_epochs: 30,
            patience: 5,
            clip_norm: 5.0,
            seed: 42,
        };
        match profile {
            Profile::GossipCop => base,
            Profile::CoAid => Self {
                max_news_sentences: 4,
                max_entity_sentences: 20,
                max_comment_sentences: 20,
                batch_size: 32,
                ..base
            },
            Profile::Desk => Self {
                embedding_dim: 32,
                hidden_dim: 16,
                max_words: 16,
                max_news_sentences: 4,
                max_entity_sentences: 8,
                max_comment_sentences: 8,
                batch_size: 8,
                learning_rate: 0.005,
                ..base
            },
        }
    }

    /// Feature width `2h` of every encoder output.
    pub fn width(&self) -> usize {
        2 * self.hidden_dim
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_words", self.max_words),
            ("max_news_sentences", self.max_news_sentences),
            ("max_entity_sentences", self.max_entity_sentences),
            ("max_comment_sentences", self.max_comment_sentences),
            ("sentences_per_entity", self.sentences_per_entity),
            ("sentences_per_comment", self.sentences_per_comment),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Contract(format!("hyperparameter {name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Contract(format!(
                "learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return Err(Error::Contract("clip_norm must be positive".into()));
        }
        Ok(())
    }

    /// The fields that fix tensor shapes; two runs must agree on these to
    /// share a checkpoint.
    pub fn structural(&self) -> [(&'static str, usize); 8] {
        [
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_words", self.max_words),
            ("max_news_sentences", self.max_news_sentences),
            ("max_entity_sentences", self.max_entity_sentences),
            ("max_comment_sentences", self.max_comment_sentences),
            ("sentences_per_entity", self.sentences_per_entity),
            ("sentences_per_comment", self.sentences_per_comment),
        ]
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = self
            .structural()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        pairs.extend([
            ("batch_size".to_string(), self.batch_size.to_string()),
            ("learning_rate".to_string(), format!("{:?}", self.learning_rate)),
            ("max_epochs".to_string(), self.max_epochs.to_string()),
            ("patience".to_string(), self.patience.to_string()),
            ("clip_norm".to_string(), format!("{:?}", self.clip_norm)),
            ("seed".to_string(), self.seed.to_string()),
        ]);
        pairs
    }

    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(pairs: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = pairs
                .get(key)
                .ok_or_else(|| Error::Contract(format!("missing hyperparameter `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Contract(format!("bad value `{raw}` for `{key}`")))
        }
        let hp = Self {
            embedding_dim: get(pairs, "embedding_dim")?,
            hidden_dim: get(pairs, "hidden_dim")?,
            max_words: get(pairs, "max_words")?,
            max_news_sentences: get(pairs, "max_news_sentences")?,
            max_entity_sentences: get(pairs, "max_entity_sentences")?,
            max_comment_sentences: get(pairs, "max_comment_sentences")?,
            sentences_per_entity: get(pairs, "sentences_per_entity")?,
            sentences_per_comment: get(pairs, "sentences_per_comment")?,
            batch_size: get(pairs, "batch_size")?,
            learning_rate: get(pairs, "learning_rate")?,
            max_epochs: get(pairs, "max_epochs")?,
            patience: get(pairs, "patience")?,
            clip_norm: get(pairs, "clip_norm")?,
            seed: get(pairs, "seed")?,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_carry_published_values() {
        let g = HyperParams::profile(Profile::GossipCop);
        assert_eq!(
            (g.max_words, g.max_news_sentences, g.max_entity_sentences, g.max_comment_sentences),
            (120, 40, 100, 100)
        );
        assert_eq!((g.sentences_per_entity, g.sentences_per_comment, g.batch_size), (4, 2, 16));
        assert_eq!(g.learning_rate, 0.001);
        let c = HyperParams::profile(Profile::CoAid);
        assert_eq!(
            (c.max_news_sentences, c.max_entity_sentences, c.max_comment_sentences, c.batch_size),
            (4, 20, 20, 32)
        );
    }

    #[test]
    fn pairs_round_trip() {
        let mut hp = HyperParams::profile(Profile::Desk);
        hp.learning_rate = 0.1 + 0.2;
        let map: BTreeMap<_, _> = hp.to_pairs().into_iter().collect();
        assert_eq!(HyperParams::from_pairs(&map).unwrap(), hp);
    }

    #[test]
    fn rejects_zero_sizes() {
        let mut hp = HyperParams::profile(Profile::Desk);
        hp.hidden_dim = 0;
        assert!(hp.validate().is_err());
        hp = HyperParams::profile(Profile::Desk);
        hp.learning_rate = 0.0;
        assert!(hp.validate().is_ok());
    }
}
