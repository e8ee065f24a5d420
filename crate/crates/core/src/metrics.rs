//! Binary classification metrics. Label 1 (fake) is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with the class roles swapped.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Fake class only.
    Positive,
    /// Unweighted mean over both classes.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_lengths(preds: &[u8], labels: &[u8]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Contract("no samples to evaluate".into()));
    }
    Ok(())
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<Confusion> {
    check_lengths(preds, labels)?;
    let mut c = Confusion::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p == 1, y == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn positive_prf(c: &Confusion) -> Prf {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Zero denominators give 0.
pub fn prf(c: &Confusion, averaging: Averaging) -> Prf {
    match averaging {
        Averaging::Positive => positive_prf(c),
        Averaging::Macro => {
            let pos = positive_prf(c);
            let neg = positive_prf(&c.swapped());
            Prf {
                precision: (pos.precision + neg.precision) / 2.0,
                recall: (pos.recall + neg.recall) / 2.0,
                f1: (pos.f1 + neg.f1) / 2.0,
            }
        }
    }
}

pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    check_lengths(preds, labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Average precision: samples ranked by descending score (ties keep input
/// order), `AP = Σ_k (R_k − R_{k−1}) P_k`.
pub fn pr_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("PR-AUC needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            precision_sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(precision_sum / positives as f64)
}

/// Serialized metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    /// `None` when the evaluated labels contain no positives.
    pub pr_auc: Option<f64>,
}

impl MetricsReport {
    /// `scores` are fake-class probabilities used for PR-AUC.
    pub fn compute(preds: &[u8], scores: &[f64], labels: &[u8]) -> Result<Self> {
        let c = confusion(preds, labels)?;
        let pos = prf(&c, Averaging::Positive);
        let mac = prf(&c, Averaging::Macro);
        let pr_auc = match pr_auc(scores, labels) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            accuracy: accuracy(preds, labels)?,
            precision_pos: pos.precision,
            recall_pos: pos.recall,
            f1_pos: pos.f1,
            precision_macro: mac.precision,
            recall_macro: mac.recall,
            f1_macro: mac.f1,
            pr_auc,
        })
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn confusion_extremes() {
        let c = confusion(&[1, 1, 1], &[1, 1, 1]).unwrap();
        assert_eq!(c.tp, 3);
        let c = confusion(&[0, 0], &[1, 1]).unwrap();
        assert_eq!(c.fn_, 2);
        assert!(confusion(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn prf_hand_values() {
        let c = Confusion {
            tp: 1,
            fp: 1,
            tn: 0,
            fn_: 0,
        };
        let p = prf(&c, Averaging::Positive);
        assert_eq!((p.precision, p.recall), (0.5, 1.0));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);

        let perfect = confusion(&[1, 0, 1], &[1, 0, 1]).unwrap();
        for avg in [Averaging::Positive, Averaging::Macro] {
            let p = prf(&perfect, avg);
            assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn zero_denominators_give_zero() {
        let c = confusion(&[0, 0], &[0, 0]).unwrap();
        let p = prf(&c, Averaging::Positive);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn accuracy_extremes() {
        assert_eq!(accuracy(&[1, 0], &[1, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1], &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn pr_auc_cases() {
        assert_eq!(pr_auc(&[0.9, 0.8, 0.1], &[1, 1, 0]).unwrap(), 1.0);
        let n = 7;
        let mut scores: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 * 0.1).collect();
        let mut labels = vec![0u8; n];
        labels[n - 1] = 1;
        assert!((pr_auc(&scores, &labels).unwrap() - 1.0 / n as f64).abs() < 1e-15);
        scores[0] = 0.0;
        assert!(matches!(
            pr_auc(&scores, &[0; 7]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    fn labels_and_preds() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn f1_identity_and_bounds((preds, labels) in labels_and_preds()) {
            let c = confusion(&preds, &labels).unwrap();
            prop_assert_eq!(c.total(), preds.len());
            for avg in [Averaging::Positive, Averaging::Macro] {
                let p = prf(&c, avg);
                for v in [p.precision, p.recall, p.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let p = prf(&c, Averaging::Positive);
            if p.precision + p.recall > 0.0 {
                let expected = 2.0 * p.precision * p.recall / (p.precision + p.recall);
                prop_assert_eq!(p.f1, expected);
                prop_assert!(p.f1 <= (2.0 * p.precision).min(2.0 * p.recall) + 1e-15);
            }
        }

        #[test]
        fn macro_invariant_under_relabeling((preds, labels) in labels_and_preds()) {
            let flip = |v: &[u8]| v.iter().map(|x| 1 - x).collect::<Vec<u8>>();
            let a = prf(&confusion(&preds, &labels).unwrap(), Averaging::Macro);
            let b = prf(&confusion(&flip(&preds), &flip(&labels)).unwrap(), Averaging::Macro);
            prop_assert!((a.precision - b.precision).abs() < 1e-15);
            prop_assert!((a.recall - b.recall).abs() < 1e-15);
            prop_assert!((a.f1 - b.f1).abs() < 1e-15);
        }

        #[test]
        fn pr_auc_monotone_invariant(
            data in proptest::collection::vec((0.0f64..1.0, 0u8..2), 1..30)
        ) {
            let (scores, mut labels): (Vec<f64>, Vec<u8>) = data.into_iter().unzip();
            labels[0] = 1;
            let ap = pr_auc(&scores, &labels).unwrap();
            prop_assert!((0.0..=1.0).contains(&ap));
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((pr_auc(&warped, &labels).unwrap() - ap).abs() < 1e-12);
        }
    }
}
