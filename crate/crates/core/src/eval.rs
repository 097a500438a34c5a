//! Metrics (accuracy, F1, AUC) and the risk-gap diagnostic.

use crate::data::PUDataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::risk::empirical_risk;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierTag {
    GPu,
    GPs,
}

impl fmt::Display for ClassifierTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierTag::GPu => f.write_str("g_pu"),
            ClassifierTag::GPs => f.write_str("g_ps"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub classifier: ClassifierTag,
    pub acc: f64,
    pub f1: f64,
    /// Absent when the evaluation labels are single-class.
    pub auc: Option<f64>,
    /// Absent when the unlabeled pool has no hidden positives.
    pub risk_gap: Option<f64>,
}

/// Accuracy, F1 on the positive class, and tie-aware AUC.
/// A prediction is positive iff score > threshold.
pub fn compute_metrics(
    scores: &[f64],
    labels: &[f64],
    threshold: f64,
) -> Result<(f64, f64, Option<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptySet("metrics over an empty evaluation set"));
    }
    for &l in labels {
        if l != 1.0 && l != -1.0 {
            return Err(Error::InvalidLabel(l));
        }
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NumericAbort {
            context: "non-finite score in metrics computation".into(),
        });
    }
    let n = scores.len() as f64;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&s, &l) in scores.iter().zip(labels.iter()) {
        match (s > threshold, l == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let acc = (tp + tn) as f64 / n;
    let f1 = if tp == 0 {
        0.0
    } else {
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        2.0 * precision * recall / (precision + recall)
    };
    Ok((acc, f1, auc(scores, labels)))
}

/// Normalized Mann-Whitney statistic via average ranks; ties count 0.5.
/// None when only one class is present.
fn auc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores validated finite")
    });
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based average rank of the tie block [i, j].
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(ranks.iter())
        .filter(|(&l, _)| l == 1.0)
        .map(|(_, &r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy)]
pub struct GapDiagnostic {
    /// Mean l(g(x), -1) over the labeled positives.
    pub r_p_neg: f64,
    /// Oracle: mean l(g(x), -1) over the hidden positives of the unlabeled pool.
    pub r_pu_neg: f64,
    /// |r_p_neg - r_pu_neg|.
    pub gap: f64,
}

/// The overfitted-risk-estimation signature: compare the negative-direction
/// risk of the labeled positives with the same risk on the unlabeled pool's
/// hidden positives. None when the pool holds no hidden positives.
pub fn risk_gap(model: &Model, ds: &PUDataset) -> Result<Option<GapDiagnostic>> {
    let d_p = ds.positive_features();
    if d_p.is_empty() {
        return Err(Error::EmptySet("labeled-positive pool for the risk gap"));
    }
    let hidden_pos: Vec<Vec<f64>> = ds
        .unlabeled_examples()
        .iter()
        .filter(|e| e.oracle_label() == 1.0)
        .map(|e| e.x.clone())
        .collect();
    if hidden_pos.is_empty() {
        return Ok(None);
    }
    let r_p_neg = empirical_risk(model, &d_p, -1.0)?;
    let r_pu_neg = empirical_risk(model, &hidden_pos, -1.0)?;
    Ok(Some(GapDiagnostic {
        r_p_neg,
        r_pu_neg,
        gap: (r_p_neg - r_pu_neg).abs(),
    }))
}

/// Score labeled pairs with the model's logit and compute metrics at the
/// logit-zero threshold.
pub fn metrics_on_labeled(
    model: &Model,
    data: &[(Vec<f64>, f64)],
) -> Result<(f64, f64, Option<f64>)> {
    let mut scores = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for (x, y) in data {
        scores.push(model.forward(x)?);
        labels.push(*y);
    }
    compute_metrics(&scores, &labels, 0.0)
}
