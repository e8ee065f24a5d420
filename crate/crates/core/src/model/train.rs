//! Mini-batch training with early stopping on validation macro-F1.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_global_norm, Adam};
use super::network::{forward, loss, predict, Prediction};
use super::params::ModelParams;
use crate::data::{EmbeddingTable, EncodedDocument};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hparams::HyperParams;
use crate::layers::{register, ParamTree};
use crate::metrics::MetricsReport;
use crate::tensor::Tensor;

/// Parameters plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer<'e> {
    pub params: ModelParams<Tensor>,
    adam: Adam,
    emb: &'e EmbeddingTable,
    hp: HyperParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub grad_norm: f64,
}

impl<'e> Trainer<'e> {
    pub fn new(params: ModelParams<Tensor>, emb: &'e EmbeddingTable, hp: &HyperParams) -> Self {
        let adam = Adam::new(params.leaves());
        Self {
            params,
            adam,
            emb,
            hp: hp.clone(),
        }
    }

    /// Mean loss over `batch`, one backward pass, clipping, one Adam update.
    pub fn step(&mut self, batch: &[&EncodedDocument]) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let mut g = Graph::new();
        let pv = register(&mut g, &self.params);
        let mut total = None;
        for sample in batch {
            let out = forward(&mut g, sample, self.emb, &pv)?;
            let l = loss(&mut g, out.logits, sample.label)?;
            total = Some(match total {
                None => l,
                Some(acc) => g.add(acc, l)?,
            });
        }
        let total = total.expect("non-empty batch");
        let mean = g.scale(total, 1.0 / batch.len() as f64)?;
        let value = g.value(mean).item();
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "loss" });
        }
        g.backward(mean)?;
        let mut grads: Vec<Tensor> = pv
            .leaves()
            .into_iter()
            .map(|&v| match g.grad(v) {
                Some(t) => t.clone(),
                None => Tensor::zeros(g.value(v).shape()),
            })
            .collect();
        let grad_norm = clip_global_norm(&mut grads, self.hp.clip_norm);
        let mut slots = self.params.leaves_mut();
        self.adam.step(&mut slots, &grads, self.hp.learning_rate)?;
        Ok(StepStats {
            loss: value,
            grad_norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<Prediction>,
    pub metrics: MetricsReport,
    pub mean_loss: f64,
}

pub fn evaluate(
    params: &ModelParams<Tensor>,
    samples: &[EncodedDocument],
    emb: &EmbeddingTable,
) -> Result<Evaluation> {
    let predictions = samples
        .iter()
        .map(|s| predict(params, s, emb))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<u8> = predictions.iter().map(|p| p.pred).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.probs[1]).collect();
    let labels: Vec<u8> = predictions.iter().map(|p| p.label).collect();
    let metrics = MetricsReport::compute(&preds, &scores, &labels)?;
    let mean_loss = predictions.iter().map(|p| p.loss).sum::<f64>() / predictions.len() as f64;
    Ok(Evaluation {
        predictions,
        metrics,
        mean_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_f1_macro: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub best: ModelParams<Tensor>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    pub stopped_early: bool,
}

fn divergence(epoch: usize, batch: usize, err: Error) -> Error {
    if err.is_numerical() {
        Error::Divergence {
            epoch,
            batch,
            detail: err.to_string(),
        }
    } else {
        err
    }
}

/// Trains from `init`. Batches are reshuffled every epoch from `hp.seed`.
/// The best epoch maximises validation macro-F1, ties broken by lower
/// validation loss; training stops after `hp.patience` epochs without
/// improvement.
pub fn train(
    init: ModelParams<Tensor>,
    train_set: &[EncodedDocument],
    val_set: &[EncodedDocument],
    emb: &EmbeddingTable,
    hp: &HyperParams,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    hp.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Contract(
            "training needs non-empty train and validation sets".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut trainer = Trainer::new(init.clone(), emb, hp);
    let mut best = (init, 0usize, f64::NEG_INFINITY, f64::INFINITY);
    let mut log = Vec::new();
    let mut waited = 0;
    let mut stopped_early = false;

    for epoch in 1..=hp.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(hp.batch_size).enumerate() {
            let batch: Vec<&EncodedDocument> = chunk.iter().map(|&i| &train_set[i]).collect();
            let stats = trainer.step(&batch).map_err(|e| divergence(epoch, b + 1, e))?;
            loss_sum += stats.loss * batch.len() as f64;
        }
        let val = evaluate(&trainer.params, val_set, emb)
            .map_err(|e| divergence(epoch, 0, e))?;
        let f1 = val.metrics.f1_macro;
        let improved = f1 > best.2 || (f1 == best.2 && val.mean_loss < best.3);
        if improved {
            best = (trainer.params.clone(), epoch, f1, val.mean_loss);
            waited = 0;
        } else {
            waited += 1;
        }
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss: val.mean_loss,
            val_accuracy: val.metrics.accuracy,
            val_f1_macro: f1,
            improved,
        };
        on_epoch(&entry);
        log.push(entry);
        if waited >= hp.patience {
            stopped_early = epoch < hp.max_epochs;
            break;
        }
    }
    Ok(TrainOutcome {
        best: best.0,
        best_epoch: best.1,
        log,
        stopped_early,
    })
}
