//! Linear classifiers: a batch L1-regularized squared-hinge SVM, an online
//! SGD hinge variant, an L2 logistic-regression stacker, resampling
//! utilities for class skew, and grid search over the regularization
//! trade-off C.

mod logistic;
mod model_io;
mod sgd;
mod svm;

pub use logistic::{logistic_objective_grad, stacker_score, train_stacker};
pub use sgd::{l1_alpha_for_c, train_sgd_online, SgdConfig};
pub use svm::{train_l1svm, train_l1svm_traced, svm_objective};

use crate::vectorize::SparseVector;
use chrono::{DateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LearnError {
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: u32, got: u32 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no positive examples")]
    NoPositives,
    #[error("dataset has no negative examples")]
    NoNegatives,
    #[error("example stream is empty")]
    EmptyStream,
    #[error("no grid-search candidate trained successfully")]
    NoViableCandidate,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("bad model file: {0}")]
    BadModelFile(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Loss the model was trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    SquaredHinge,
    Hinge,
    Logistic,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::SquaredHinge => "squared_hinge",
            LossKind::Hinge => "hinge",
            LossKind::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "squared_hinge" => Some(LossKind::SquaredHinge),
            "hinge" => Some(LossKind::Hinge),
            "logistic" => Some(LossKind::Logistic),
            _ => None,
        }
    }
}

/// A trained linear model: a dense weight vector plus metadata. Scores are
/// plain dot products; the dimension is always `weights.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    /// Hash width for models trained on hashed features.
    pub bits: Option<u32>,
    /// Regularization trade-off the model was trained with; 0 means none.
    pub c: f64,
    pub loss: LossKind,
    pub trained_at: DateTime<Utc>,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bits: Option<u32>, c: f64, loss: LossKind) -> Self {
        debug_assert!(weights.iter().all(|w| w.is_finite()));
        LinearModel {
            weights,
            bits,
            c,
            loss,
            trained_at: Utc.timestamp_opt(0, 0).unwrap(),
        }
    }

    pub fn dim(&self) -> u32 {
        self.weights.len() as u32
    }

    /// Stamp a deterministic training timestamp (callers use the newest
    /// training-record timestamp so artifacts stay bit-reproducible).
    pub fn with_trained_at(mut self, at: DateTime<Utc>) -> Self {
        self.trained_at = at;
        self
    }

    /// Record the hash width the model's feature space was built with.
    pub fn with_bits(mut self, bits: u32) -> Self {
        self.bits = Some(bits);
        self
    }

    pub fn score(&self, vector: &SparseVector) -> Result<f64, LearnError> {
        if vector.dim() != self.dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim(),
                got: vector.dim(),
            });
        }
        Ok(vector.dot(&self.weights))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), LearnError> {
        model_io::save(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LearnError> {
        model_io::load(path)
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<(), LearnError> {
        model_io::write_to(self, writer)
    }

    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self, LearnError> {
        model_io::read_from(reader)
    }
}

/// Labeled sparse rows sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<(SparseVector, bool)>,
    dim: u32,
}

impl Dataset {
    pub fn new(dim: u32, rows: Vec<(SparseVector, bool)>) -> Result<Self, LearnError> {
        for (vector, _) in &rows {
            if vector.dim() != dim {
                return Err(LearnError::DimensionMismatch {
                    expected: dim,
                    got: vector.dim(),
                });
            }
        }
        Ok(Dataset { rows, dim })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[(SparseVector, bool)] {
        &self.rows
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|&(_, l)| l).collect()
    }

    pub fn vectors(&self) -> Vec<SparseVector> {
        self.rows.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|&&(_, l)| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    /// Copy with a constant-1 intercept column appended to every row,
    /// penalized like any other weight by the trainers.
    pub fn with_intercept(&self) -> Dataset {
        Dataset {
            rows: self
                .rows
                .iter()
                .map(|(v, l)| (v.with_intercept(), *l))
                .collect(),
            dim: self.dim + 1,
        }
    }
}

/// Batch training configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Data-loss weight C in `||w||_1 + C * sum(squared hinge)`.
    pub c: f64,
    pub max_epochs: usize,
    /// Relative objective-decrease stopping threshold.
    pub tol: f64,
    /// Recorded for reproducibility; the batch solver is deterministic and
    /// only stochastic trainers consume it.
    pub seed: u64,
}

impl TrainConfig {
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c,
            ..TrainConfig::default()
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 0.5,
            max_epochs: 500,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Decision values `w . x` for each vector, order preserved.
pub fn predict_scores(model: &LinearModel, vectors: &[SparseVector]) -> Result<Vec<f64>, LearnError> {
    vectors.iter().map(|v| model.score(v)).collect()
}

fn shuffled(mut rows: Vec<(SparseVector, bool)>, seed: u64) -> Vec<(SparseVector, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    rows
}

/// Resample positives with replacement to exactly `factor` times the
/// original positive count; negatives pass through untouched. The output
/// order is shuffled deterministically by `seed`.
pub fn upsample_positives(
    dataset: &Dataset,
    factor: usize,
    seed: u64,
) -> Result<Dataset, LearnError> {
    if factor == 0 {
        return Err(LearnError::BadParameter("factor must be positive".into()));
    }
    let positives: Vec<&(SparseVector, bool)> =
        dataset.rows.iter().filter(|&&(_, l)| l).collect();
    if positives.is_empty() {
        return Err(LearnError::NoPositives);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(SparseVector, bool)> = dataset
        .rows
        .iter()
        .filter(|&&(_, l)| !l)
        .cloned()
        .collect();
    let draws = factor * positives.len();
    for _ in 0..draws {
        rows.push(positives[rng.gen_range(0..positives.len())].clone());
    }
    Ok(Dataset {
        rows: shuffled(rows, seed),
        dim: dataset.dim,
    })
}

/// Keep `round(keep_rate * negative count)` negatives, sampled with or
/// without replacement; positives pass through untouched. Deterministic
/// by `seed`.
pub fn downsample_negatives(
    dataset: &Dataset,
    keep_rate: f64,
    replacement: bool,
    seed: u64,
) -> Result<Dataset, LearnError> {
    if !(keep_rate > 0.0 && keep_rate <= 1.0) {
        return Err(LearnError::BadParameter(
            "keep_rate must be in (0, 1]".into(),
        ));
    }
    let negatives: Vec<&(SparseVector, bool)> =
        dataset.rows.iter().filter(|&&(_, l)| !l).collect();
    if negatives.is_empty() {
        return Err(LearnError::NoNegatives);
    }
    let target = (keep_rate * negatives.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<(SparseVector, bool)> =
        dataset.rows.iter().filter(|&&(_, l)| l).cloned().collect();
    if replacement {
        for _ in 0..target {
            rows.push(negatives[rng.gen_range(0..negatives.len())].clone());
        }
    } else {
        let chosen = rand::seq::index::sample(&mut rng, negatives.len(), target);
        for idx in chosen.iter() {
            rows.push(negatives[idx].clone());
        }
    }
    Ok(Dataset {
        rows: shuffled(rows, seed),
        dim: dataset.dim,
    })
}

/// The default C ladder: decades from 1e-7 up to 10, plus 0.5.
pub const DEFAULT_C_LADDER: [f64; 10] = [
    1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0, 10.0,
];

/// One grid-search row: the candidate, its validation AUC (if training
/// succeeded), and the training wall time.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub c: f64,
    pub auc: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub rows: Vec<GridRow>,
    pub best_c: f64,
    pub best_auc: f64,
}

/// Train one model per candidate C on `train`, rank by validation ROC AUC,
/// and return the winner; ties break toward the smaller (more regularized)
/// C. Candidates that fail to train are recorded and skipped. Candidates
/// run in parallel; each training is itself deterministic.
pub fn grid_search_c(
    train: &Dataset,
    valid: &Dataset,
    candidates: &[f64],
    base: &TrainConfig,
) -> Result<GridSearchOutcome, LearnError> {
    if candidates.is_empty() {
        return Err(LearnError::BadParameter("no candidates".into()));
    }
    if train.dim() != valid.dim() {
        return Err(LearnError::DimensionMismatch {
            expected: train.dim(),
            got: valid.dim(),
        });
    }
    let valid_labels = valid.labels();
    let valid_vectors: Vec<SparseVector> = valid.vectors();

    let rows: Vec<GridRow> = candidates
        .par_iter()
        .map(|&c| {
            let started = Instant::now();
            let config = TrainConfig { c, ..*base };
            let outcome = train_l1svm(train, &config)
                .and_then(|model| predict_scores(&model, &valid_vectors))
                .map_err(|e| e.to_string())
                .and_then(|scores| {
                    crate::eval::roc_auc(&scores, &valid_labels).map_err(|e| e.to_string())
                });
            let seconds = started.elapsed().as_secs_f64();
            match outcome {
                Ok(auc) => GridRow {
                    c,
                    auc: Some(auc),
                    seconds,
                    error: None,
                },
                Err(error) => GridRow {
                    c,
                    auc: None,
                    seconds,
                    error: Some(error),
                },
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for row in &rows {
        if let Some(auc) = row.auc {
            best = match best {
                None => Some((row.c, auc)),
                Some((bc, ba)) => {
                    if auc > ba || (auc == ba && row.c < bc) {
                        Some((row.c, auc))
                    } else {
                        Some((bc, ba))
                    }
                }
            };
        }
    }
    let (best_c, best_auc) = best.ok_or(LearnError::NoViableCandidate)?;
    Ok(GridSearchOutcome {
        rows,
        best_c,
        best_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::SparseVector;

    fn unit(dim: u32, index: u32) -> SparseVector {
        SparseVector::from_indices(dim, vec![(index, 1.0)])
    }

    fn skewed_dataset() -> Dataset {
        // 2 positives on feature 0, 8 negatives on feature 1
        let mut rows = Vec::new();
        for _ in 0..2 {
            rows.push((unit(2, 0), true));
        }
        for _ in 0..8 {
            rows.push((unit(2, 1), false));
        }
        Dataset::new(2, rows).unwrap()
    }

    #[test]
    fn dataset_rejects_mixed_dims() {
        let rows = vec![(unit(2, 0), true), (unit(3, 0), false)];
        assert!(matches!(
            Dataset::new(2, rows),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn upsample_counts_and_determinism() {
        let data = skewed_dataset();
        let once = upsample_positives(&data, 1, 9).unwrap();
        assert_eq!(once.positives(), 2);
        assert_eq!(once.negatives(), 8);

        let five = upsample_positives(&data, 5, 9).unwrap();
        assert_eq!(five.positives(), 10);
        assert_eq!(five.negatives(), 8);

        let again = upsample_positives(&data, 5, 9).unwrap();
        assert_eq!(five, again);
        let other_seed = upsample_positives(&data, 5, 10).unwrap();
        assert_eq!(other_seed.positives(), 10);
    }

    #[test]
    fn upsample_requires_positives() {
        let rows = vec![(unit(1, 0), false)];
        let data = Dataset::new(1, rows).unwrap();
        assert_eq!(
            upsample_positives(&data, 2, 0),
            Err(LearnError::NoPositives)
        );
    }

    #[test]
    fn downsample_counts() {
        let mut rows = vec![(unit(2, 0), true)];
        for _ in 0..1000 {
            rows.push((unit(2, 1), false));
        }
        let data = Dataset::new(2, rows).unwrap();
        let kept = downsample_negatives(&data, 0.1, false, 3).unwrap();
        assert_eq!(kept.negatives(), 100);
        assert_eq!(kept.positives(), 1);
    }

    #[test]
    fn downsample_full_keep_without_replacement_is_identity_up_to_order() {
        let data = skewed_dataset();
        let kept = downsample_negatives(&data, 1.0, false, 5).unwrap();
        assert_eq!(kept.len(), data.len());
        assert_eq!(kept.positives(), data.positives());
        // same multiset of rows
        let sort_key = |rows: &[(SparseVector, bool)]| {
            let mut keys: Vec<String> = rows.iter().map(|r| format!("{r:?}")).collect();
            keys.sort();
            keys
        };
        assert_eq!(sort_key(data.rows()), sort_key(kept.rows()));
    }

    #[test]
    fn downsample_replacement_can_repeat_but_plain_never_does() {
        // 4 distinguishable negatives, keep all of them
        let mut rows = vec![(unit(8, 0), true)];
        for i in 1..5u32 {
            rows.push((unit(8, i), false));
        }
        let data = Dataset::new(8, rows).unwrap();

        let multiset = |d: &Dataset| {
            let mut keys: Vec<String> = d
                .rows()
                .iter()
                .filter(|&&(_, l)| !l)
                .map(|r| format!("{:?}", r.0))
                .collect();
            keys.sort();
            keys
        };
        let without = downsample_negatives(&data, 1.0, false, 1).unwrap();
        let unique: std::collections::HashSet<String> = multiset(&without).into_iter().collect();
        assert_eq!(unique.len(), 4, "sampling without replacement never repeats");

        // with replacement, some seed repeats a negative
        let repeated = (0..50u64).any(|seed| {
            let with = downsample_negatives(&data, 1.0, true, seed).unwrap();
            let keys = multiset(&with);
            let unique: std::collections::HashSet<String> = keys.iter().cloned().collect();
            unique.len() < keys.len()
        });
        assert!(repeated, "replacement sampling should repeat for some seed");
    }

    #[test]
    fn grid_search_single_candidate_and_row_count() {
        let data = skewed_dataset();
        let outcome =
            grid_search_c(&data, &data, &[0.5], &TrainConfig::default()).unwrap();
        assert_eq!(outcome.rows.len(), 1);
        assert_eq!(outcome.best_c, 0.5);

        let outcome = grid_search_c(
            &data,
            &data,
            &[1e-7, 1e-3, 0.5, 10.0],
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(outcome.rows.len(), 4);
    }

    #[test]
    fn grid_search_prefers_separating_model_over_degenerate() {
        // The derived zero-weight threshold: at w=0 the loss gradient per
        // coordinate is -2C * sum(y_i x_ij). With C small enough the L1
        // subgradient dominates and the optimum is exactly w = 0, which
        // scores every example identically (AUC 0.5 by ties).
        let data = skewed_dataset();
        let outcome = grid_search_c(
            &data,
            &data,
            &[1e-7, 10.0],
            &TrainConfig::default(),
        )
        .unwrap();
        let degenerate = &outcome.rows[0];
        assert_eq!(degenerate.auc, Some(0.5));
        assert_eq!(outcome.best_c, 10.0);
        assert!(outcome.best_auc > 0.99);
    }

    #[test]
    fn grid_search_tie_breaks_to_smaller_c() {
        let data = skewed_dataset();
        // both candidates separate perfectly -> tie at AUC 1.0
        let outcome =
            grid_search_c(&data, &data, &[10.0, 5.0], &TrainConfig::default()).unwrap();
        assert_eq!(outcome.best_auc, 1.0);
        assert_eq!(outcome.best_c, 5.0);
    }

    #[test]
    fn default_ladder_contains_the_table_values() {
        assert!(DEFAULT_C_LADDER.contains(&0.5));
        assert!(DEFAULT_C_LADDER.contains(&1e-7));
        assert!(DEFAULT_C_LADDER.contains(&10.0));
        assert!(DEFAULT_C_LADDER.windows(2).all(|w| w[0] < w[1]));
    }
}
