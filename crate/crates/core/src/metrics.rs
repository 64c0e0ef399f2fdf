//! Evaluation metrics: accuracy, sensitivity, specificity, ROC AUC,
//! expected calibration error and negative log-likelihood.
//!
//! Decisions use the argmax of the predicted distribution with ties going
//! to the lower class index. For binary tasks class 1 is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::numerics::{cross_entropy, softmax_unchecked, ProbabilityVector};
use crate::scalar::Scalar;
use crate::data::Dataset;

/// Default number of equal-width confidence bins for [`ece`].
pub const DEFAULT_ECE_BINS: usize = 10;

/// Summary of one evaluation pass. Undefined quantities are `None`
/// (serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub sen: Option<f64>,
    pub spe: Option<f64>,
    pub auc: Option<f64>,
    pub ece: f64,
    pub nll: f64,
    pub n_samples: usize,
}

impl MetricsReport {
    /// Flat JSON object, one key per field.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Accuracy, sensitivity and specificity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationRates {
    pub acc: f64,
    /// `TP / (TP + FN)`; binary tasks with at least one positive only.
    pub sen: Option<f64>,
    /// `TN / (TN + FP)`; binary tasks with at least one negative only.
    pub spe: Option<f64>,
}

fn check_aligned<T: Scalar>(probs: &[ProbabilityVector<T>], labels: &[usize]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    if probs.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let classes = probs[0].len();
    if probs.iter().any(|p| p.len() != classes) {
        return Err(Error::invalid("predictions have differing class counts"));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!("label {y} out of range for {classes} classes")));
    }
    Ok(())
}

pub fn classification_metrics<T: Scalar>(
    probs: &[ProbabilityVector<T>],
    labels: &[usize],
) -> Result<ClassificationRates> {
    check_aligned(probs, labels)?;
    let n = labels.len();
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| p.argmax() == y)
        .count();
    let acc = correct as f64 / n as f64;
    if probs[0].len() != 2 {
        return Ok(ClassificationRates {
            acc,
            sen: None,
            spe: None,
        });
    }
    let (mut tp, mut fn_, mut tn, mut fp) = (0usize, 0usize, 0usize, 0usize);
    for (p, &y) in probs.iter().zip(labels) {
        match (y, p.argmax()) {
            (1, 1) => tp += 1,
            (1, _) => fn_ += 1,
            (_, 0) => tn += 1,
            _ => fp += 1,
        }
    }
    let rate = |hit: usize, miss: usize| (hit + miss > 0).then(|| hit as f64 / (hit + miss) as f64);
    Ok(ClassificationRates {
        acc,
        sen: rate(tp, fn_),
        spe: rate(tn, fp),
    })
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half (Mann-Whitney U with mid-ranks).
///
/// Ranks are accumulated as exact integers, so the result is the exact
/// ratio `U / (n_pos · n_neg)` rounded once.
pub fn auc<T: Scalar>(scores: &[T], positive: &[bool]) -> Result<T> {
    if scores.len() != positive.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as u128;
    let n_neg = positive.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(
            "AUC needs both positive and negative samples".to_string(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    // Twice the positives' rank sum; a tie group at sorted positions
    // [start, end) shares the mid-rank (start + 1 + end) / 2.
    let mut rank_sum_x2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let positives = order[start..end].iter().filter(|&&i| positive[i]).count() as u128;
        rank_sum_x2 += positives * (start as u128 + 1 + end as u128);
        start = end;
    }
    let u_x2 = rank_sum_x2 - n_pos * (n_pos + 1);
    let to_t = |v: u128| T::from_u128(v).expect("count representable");
    Ok(to_t(u_x2) / to_t(2 * n_pos * n_neg))
}

/// Binary AUC on the class-1 probability, or the macro average of
/// one-vs-rest AUCs over classes that have both positives and negatives.
pub fn multiclass_auc<T: Scalar>(probs: &[ProbabilityVector<T>], labels: &[usize]) -> Result<T> {
    check_aligned(probs, labels)?;
    let classes = probs[0].len();
    let one_vs_rest = |c: usize| {
        let scores: Vec<T> = probs.iter().map(|p| p[c]).collect();
        let positive: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        auc(&scores, &positive)
    };
    if classes == 2 {
        return one_vs_rest(1);
    }
    let mut total = T::zero();
    let mut defined = 0;
    for c in 0..classes {
        match one_vs_rest(c) {
            Ok(a) => {
                total += a;
                defined += 1;
            }
            Err(Error::Undefined(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if defined == 0 {
        return Err(Error::Undefined("no class has both positives and negatives".to_string()));
    }
    Ok(total / T::from_count(defined))
}

/// Expected calibration error over `bins` equal-width, right-closed
/// confidence bins; confidence 0 falls into the first bin.
pub fn ece<T: Scalar>(probs: &[ProbabilityVector<T>], labels: &[usize], bins: usize) -> Result<T> {
    check_aligned(probs, labels)?;
    if bins == 0 {
        return Err(Error::invalid("ECE needs at least one bin"));
    }
    let mut count = vec![0usize; bins];
    let mut confidence = vec![T::zero(); bins];
    let mut correct = vec![0usize; bins];
    let b = T::from_count(bins);
    for (p, &y) in probs.iter().zip(labels) {
        let predicted = p.argmax();
        let conf = p[predicted];
        let idx = (conf * b).ceil().to_usize().unwrap_or(0).clamp(1, bins) - 1;
        count[idx] += 1;
        confidence[idx] += conf;
        if predicted == y {
            correct[idx] += 1;
        }
    }
    let n = T::from_count(labels.len());
    let mut total = T::zero();
    for k in 0..bins {
        if count[k] == 0 {
            continue;
        }
        let nk = T::from_count(count[k]);
        let acc = T::from_count(correct[k]) / nk;
        let conf = confidence[k] / nk;
        total += nk / n * (acc - conf).abs();
    }
    Ok(total)
}

/// Mean clamped cross-entropy of the true class.
pub fn nll<T: Scalar>(probs: &[ProbabilityVector<T>], labels: &[usize]) -> Result<T> {
    check_aligned(probs, labels)?;
    let mut total = T::zero();
    for (p, &y) in probs.iter().zip(labels) {
        total += cross_entropy(p, y)?;
    }
    Ok(total / T::from_count(labels.len()))
}

/// All metrics for one set of predictions.
pub fn evaluate<T: Scalar>(
    probs: &[ProbabilityVector<T>],
    labels: &[usize],
    bins: usize,
) -> Result<MetricsReport> {
    let rates = classification_metrics(probs, labels)?;
    let auc = match multiclass_auc(probs, labels) {
        Ok(a) => Some(a.as_f64()),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        acc: rates.acc,
        sen: rates.sen,
        spe: rates.spe,
        auc,
        ece: ece(probs, labels, bins)?.as_f64(),
        nll: nll(probs, labels)?.as_f64(),
        n_samples: labels.len(),
    })
}

/// Softmax outputs of `params` on every row of the dataset.
pub fn predict_proba<T: Scalar>(
    params: &ModelParameters<T>,
    dataset: &Dataset<T>,
) -> Result<Vec<ProbabilityVector<T>>> {
    let logits = params.forward(dataset.features())?;
    Ok(logits.iter_rows().map(softmax_unchecked).collect())
}

/// Evaluates `params` against the observed labels of `dataset`.
pub fn evaluate_model<T: Scalar>(
    params: &ModelParameters<T>,
    dataset: &Dataset<T>,
    bins: usize,
) -> Result<MetricsReport> {
    let probs = predict_proba(params, dataset)?;
    evaluate(&probs, dataset.labels(), bins)
}
