//! Ranking and threshold metrics plus time-based dataset splitting.

use crate::corpus::RevisionRecord;
use chrono::{DateTime, Utc};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("need at least one example of each class")]
    SingleClassData,
    #[error("need at least one positive example")]
    NoPositives,
    #[error("scores and labels must have equal, nonzero length")]
    LengthMismatch,
    #[error("train_end must precede valid_end")]
    BadSplit,
}

/// Evaluation summary at a fixed decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub positives: usize,
    pub negatives: usize,
    pub threshold: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "roc_auc,pr_auc,accuracy,precision,recall,f1,positives,negatives,threshold";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{:.6}",
            self.roc_auc,
            self.pr_auc,
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.positives,
            self.negatives,
            self.threshold
        )
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "roc_auc   {:.6}", self.roc_auc)?;
        writeln!(f, "pr_auc    {:.6}", self.pr_auc)?;
        writeln!(f, "accuracy  {:.6}", self.accuracy)?;
        writeln!(f, "precision {:.6}", self.precision)?;
        writeln!(f, "recall    {:.6}", self.recall)?;
        writeln!(f, "f1        {:.6}", self.f1)?;
        writeln!(f, "positives {}", self.positives)?;
        writeln!(f, "negatives {}", self.negatives)?;
        write!(f, "threshold {:.6}", self.threshold)
    }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch);
    }
    Ok(())
}

/// Area under the ROC curve via the rank statistic: over all
/// positive-negative pairs, the fraction where the positive outscores the
/// negative, ties counted 1/2. Exact, O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassData);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // average ranks within tie groups, 1-based
    let mut positive_rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                positive_rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: the step integral sum over recall increments of the
/// precision at each increment, sweeping thresholds in descending score
/// order with tie groups processed as one step.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    check_lengths(scores, labels)?;
    let total_positives = labels.iter().filter(|&&l| l).count();
    if total_positives == 0 {
        return Err(EvalError::NoPositives);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut average_precision = 0.0f64;
    let mut true_positives = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                true_positives += 1;
            }
        }
        seen += j - i + 1;
        let recall = true_positives as f64 / total_positives as f64;
        let precision = true_positives as f64 / seen as f64;
        average_precision += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(average_precision)
}

/// Confusion-matrix metrics with prediction = score > threshold.
/// Precision and recall are 0 when their denominators are 0; f1 is 0 when
/// precision + recall is 0. Ranking fields are left at 0 for the caller.
pub fn threshold_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> EvalReport {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&score, &label) in scores.iter().zip(labels) {
        match (score > threshold, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = scores.len();
    let accuracy = if total == 0 {
        0.0
    } else {
        (tp + tn) as f64 / total as f64
    };
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    EvalReport {
        roc_auc: 0.0,
        pr_auc: 0.0,
        accuracy,
        precision,
        recall,
        f1,
        positives: tp + fn_,
        negatives: fp + tn,
        threshold,
    }
}

/// Full report: ranking metrics plus threshold metrics in one pass.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<EvalReport, EvalError> {
    let mut report = threshold_metrics(scores, labels, threshold);
    report.roc_auc = roc_auc(scores, labels)?;
    report.pr_auc = pr_auc(scores, labels)?;
    Ok(report)
}

/// Boundaries of a chronological train/validation/test partition.
/// Both boundaries are exclusive on the left: a record exactly at
/// `train_end` belongs to validation, one at `valid_end` to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_end: DateTime<Utc>,
    pub valid_end: DateTime<Utc>,
}

impl SplitSpec {
    pub fn new(train_end: DateTime<Utc>, valid_end: DateTime<Utc>) -> Result<Self, EvalError> {
        if train_end < valid_end {
            Ok(SplitSpec {
                train_end,
                valid_end,
            })
        } else {
            Err(EvalError::BadSplit)
        }
    }
}

/// Partition records chronologically; no record is lost or duplicated.
pub fn time_split<I>(
    records: I,
    spec: SplitSpec,
) -> (
    Vec<RevisionRecord>,
    Vec<RevisionRecord>,
    Vec<RevisionRecord>,
)
where
    I: IntoIterator<Item = RevisionRecord>,
{
    let mut train = Vec::new();
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for record in records {
        if record.timestamp < spec.train_end {
            train.push(record);
        } else if record.timestamp < spec.valid_end {
            valid.push(record);
        } else {
            test.push(record);
        }
    }
    (train, valid, test)
}
