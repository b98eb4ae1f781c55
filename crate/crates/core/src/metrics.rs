//! Binary classification metrics at the 0.5 threshold plus ROC AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::classify;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(scores: &[f64], labels: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (classify(s), y) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// A metric whose denominator was zero; its value is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateMetric {
    Precision,
    Recall,
    Specificity,
    F1,
    AucRoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auc_roc: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
    pub degenerate: Vec<DegenerateMetric>,
}

fn ratio(num: usize, den: usize, tag: DegenerateMetric, flags: &mut Vec<DegenerateMetric>) -> f64 {
    if den == 0 {
        flags.push(tag);
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    pub fn from_confusion(c: Confusion, auc: Option<f64>) -> Self {
        let mut degenerate = Vec::new();
        let accuracy = (c.tp + c.tn) as f64 / c.total().max(1) as f64;
        let precision = ratio(
            c.tp,
            c.tp + c.fp,
            DegenerateMetric::Precision,
            &mut degenerate,
        );
        let recall = ratio(
            c.tp,
            c.tp + c.fn_,
            DegenerateMetric::Recall,
            &mut degenerate,
        );
        let specificity = ratio(
            c.tn,
            c.tn + c.fp,
            DegenerateMetric::Specificity,
            &mut degenerate,
        );
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate.push(DegenerateMetric::F1);
            0.0
        };
        let auc_roc = auc.unwrap_or_else(|| {
            degenerate.push(DegenerateMetric::AucRoc);
            0.0
        });
        Self {
            accuracy,
            precision,
            recall,
            specificity,
            f1,
            auc_roc,
            confusion: c,
            degenerate,
        }
    }
}

/// Area under the ROC curve by the trapezoidal rule over distinct score
/// thresholds. Tied scores form one ROC step, which credits tied
/// positive/negative pairs with 1/2. `None` when either class is absent.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Some(area / (positives * negatives) as f64)
}

pub fn evaluate_scores(scores: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    if scores.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(MetricsReport::from_confusion(
        Confusion::from_predictions(scores, labels),
        roc_auc(scores, labels),
    ))
}
