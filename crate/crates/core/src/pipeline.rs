//! End-to-end glue: corpus directory ingestion, hashed training, scoring,
//! and the stacked per-family ensemble. The CLI, the scoring server, and the
//! batch evaluator all call through here so every path scores a revision
//! with exactly the same code.

use crate::corpus::{join, parse_dump, parse_labels, parse_meta, CorpusError, RevisionRecord};
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::features::{extract_all, Family, FeatureBag};
use crate::learn::{
    train_l1svm, train_stacker, Dataset, LearnError, LinearModel, TrainConfig,
};
use crate::synth::corpus_paths;
use crate::vectorize::{hash_vectorize, SparseVector, VectorizeError};
use chrono::{DateTime, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::BufReader;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IngestStats {
    pub records: usize,
    pub skipped_revisions: u64,
    pub skipped_meta_rows: u64,
    pub skipped_label_rows: u64,
}

/// Read a corpus directory (dump.xml, meta.csv, labels.csv) into joined
/// records. Skipped rows and revisions are counted, not fatal.
pub fn ingest_dir(dir: &Path) -> Result<(Vec<RevisionRecord>, IngestStats), PipelineError> {
    let (dump_path, meta_path, labels_path) = corpus_paths(dir);
    let meta = parse_meta(BufReader::new(std::fs::File::open(meta_path)?))?;
    let labels = parse_labels(BufReader::new(std::fs::File::open(labels_path)?))?;
    let mut parser = parse_dump(BufReader::new(std::fs::File::open(dump_path)?));
    let mut records = Vec::new();
    for item in join(parser.by_ref(), &meta, &labels) {
        records.push(item?);
    }
    let stats = IngestStats {
        records: records.len(),
        skipped_revisions: parser.skipped(),
        skipped_meta_rows: meta.skipped,
        skipped_label_rows: labels.skipped,
    };
    Ok((records, stats))
}

/// Feature bags plus labels for every labeled record, in record order.
pub fn labeled_examples(records: &[RevisionRecord]) -> Vec<(FeatureBag, bool)> {
    records
        .iter()
        .filter_map(|r| r.label.map(|label| (extract_all(r), label)))
        .collect()
}

/// Hash-vectorize examples at `bits` and append the intercept column, so
/// the dataset dimension is `2^bits + 1`.
pub fn hashed_dataset(
    examples: &[(FeatureBag, bool)],
    bits: u32,
) -> Result<Dataset, PipelineError> {
    let mut rows = Vec::with_capacity(examples.len());
    for (bag, label) in examples {
        rows.push((hash_vectorize(bag, bits)?.with_intercept(), *label));
    }
    let dim = (1u32 << bits) + 1;
    Ok(Dataset::new(dim, rows)?)
}

/// Newest timestamp among the records; the deterministic value stamped into
/// trained models so artifacts are bit-reproducible.
pub fn data_cutoff(records: &[RevisionRecord]) -> DateTime<Utc> {
    records
        .iter()
        .map(|r| r.timestamp)
        .max()
        .unwrap_or_else(|| Utc.timestamp_opt(0, 0).unwrap())
}

/// Train the combined model on every labeled record: all feature families
/// hashed into one space.
pub fn train_combined(
    records: &[RevisionRecord],
    bits: u32,
    config: &TrainConfig,
) -> Result<LinearModel, PipelineError> {
    let examples = labeled_examples(records);
    if examples.is_empty() {
        return Err(PipelineError::Data(
            "no labeled records to train on".to_string(),
        ));
    }
    let dataset = hashed_dataset(&examples, bits)?;
    let model = train_l1svm(&dataset, config)?;
    Ok(model
        .with_trained_at(data_cutoff(records))
        .with_bits(bits))
}

/// Vectorize one record the way a model of this shape expects: hash at the
/// model's bits, appending the intercept column when the model has one.
pub fn vectorize_for_model(
    model: &LinearModel,
    record: &RevisionRecord,
) -> Result<SparseVector, PipelineError> {
    let bits = model.bits.ok_or_else(|| {
        PipelineError::Data("model carries no hash width; cannot vectorize records".to_string())
    })?;
    let hashed = hash_vectorize(&extract_all(record), bits)?;
    let vector = if model.dim() == hashed.dim() + 1 {
        hashed.with_intercept()
    } else {
        hashed
    };
    if vector.dim() != model.dim() {
        return Err(PipelineError::Learn(LearnError::DimensionMismatch {
            expected: model.dim(),
            got: vector.dim(),
        }));
    }
    Ok(vector)
}

/// Score one record: the single code path shared by batch evaluation and
/// the online server.
pub fn score_record(model: &LinearModel, record: &RevisionRecord) -> Result<f64, PipelineError> {
    let vector = vectorize_for_model(model, record)?;
    Ok(model.score(&vector)?)
}

pub fn score_records(
    model: &LinearModel,
    records: &[RevisionRecord],
) -> Result<Vec<f64>, PipelineError> {
    records.iter().map(|r| score_record(model, r)).collect()
}

/// Evaluate a model over the labeled subset of `records`.
pub fn evaluate_records(
    model: &LinearModel,
    records: &[RevisionRecord],
    threshold: f64,
) -> Result<EvalReport, PipelineError> {
    let labeled: Vec<&RevisionRecord> = records.iter().filter(|r| r.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(PipelineError::Data("no labeled records to evaluate".to_string()));
    }
    let mut scores = Vec::with_capacity(labeled.len());
    let mut labels = Vec::with_capacity(labeled.len());
    for record in labeled {
        scores.push(score_record(model, record)?);
        labels.push(record.label.expect("filtered to labeled records"));
    }
    Ok(evaluate(&scores, &labels, threshold)?)
}

/// The regularization each per-family model defaults to.
pub fn default_family_c(family: Family) -> f64 {
    match family {
        Family::Title => 0.5,
        Family::User => 0.1,
        Family::CommentStruct => 0.1,
        Family::CommentLink => 10.0,
        Family::CommentText => 1.0,
    }
}

/// Five per-family first-level models plus the logistic stacker trained on
/// their out-of-fold scores.
#[derive(Debug, Clone)]
pub struct StackModel {
    pub family_models: Vec<(Family, LinearModel)>,
    pub stacker: LinearModel,
}

fn family_dataset(
    examples: &[(FeatureBag, bool)],
    indices: &[usize],
    family: Family,
    bits: u32,
) -> Result<Dataset, PipelineError> {
    let mut rows = Vec::with_capacity(indices.len());
    for &i in indices {
        let (bag, label) = &examples[i];
        rows.push((
            hash_vectorize(&bag.filter_family(family), bits)?.with_intercept(),
            *label,
        ));
    }
    let dim = (1u32 << bits) + 1;
    Ok(Dataset::new(dim, rows)?)
}

/// Out-of-fold meta-features: shuffle example indices with `seed`, split in
/// two folds, train each family model on one fold and score the other. The
/// returned matrix is in the original example order, one column per family,
/// alongside the labels.
pub fn oof_meta_features(
    examples: &[(FeatureBag, bool)],
    bits: u32,
    base: &TrainConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<bool>), PipelineError> {
    if examples.len() < 4 {
        return Err(PipelineError::Data(
            "need at least 4 examples for 2-fold stacking".to_string(),
        ));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (fold_a, fold_b) = order.split_at(order.len() / 2);

    let mut meta = vec![vec![0.0f64; Family::ALL.len()]; examples.len()];
    for (slot, family) in Family::ALL.into_iter().enumerate() {
        for (train_fold, score_fold) in [(fold_a, fold_b), (fold_b, fold_a)] {
            let config = TrainConfig {
                c: default_family_c(family),
                ..*base
            };
            let train_set = family_dataset(examples, train_fold, family, bits)?;
            let model = train_l1svm(&train_set, &config)?;
            for &i in score_fold {
                let (bag, _) = &examples[i];
                let vector = hash_vectorize(&bag.filter_family(family), bits)?.with_intercept();
                meta[i][slot] = model.score(&vector)?;
            }
        }
    }
    let labels = examples.iter().map(|&(_, l)| l).collect();
    Ok((meta, labels))
}

/// A trained stack plus the out-of-fold evidence it was built from.
#[derive(Debug, Clone)]
pub struct TrainedStack {
    pub stack: StackModel,
    /// Out-of-fold meta-feature matrix, original example order.
    pub oof_meta: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl TrainedStack {
    /// ROC AUC of each family's out-of-fold scores.
    pub fn family_oof_auc(&self) -> Result<Vec<(Family, f64)>, EvalError> {
        Family::ALL
            .into_iter()
            .enumerate()
            .map(|(slot, family)| {
                let column: Vec<f64> = self.oof_meta.iter().map(|row| row[slot]).collect();
                crate::eval::roc_auc(&column, &self.labels).map(|auc| (family, auc))
            })
            .collect()
    }

    /// ROC AUC of the stacker applied to the out-of-fold meta-features.
    pub fn stacker_oof_auc(&self) -> Result<f64, EvalError> {
        let scores: Vec<f64> = self
            .oof_meta
            .iter()
            .map(|row| {
                crate::learn::stacker_score(&self.stack.stacker, row)
                    .expect("stacker width matches meta rows")
            })
            .collect();
        crate::eval::roc_auc(&scores, &self.labels)
    }
}

/// Train the full stack: per-family models on all examples, the logistic
/// stacker on the out-of-fold meta-features.
pub fn train_stack(
    records: &[RevisionRecord],
    bits: u32,
    base: &TrainConfig,
    l2_strength: f64,
    seed: u64,
) -> Result<TrainedStack, PipelineError> {
    let examples = labeled_examples(records);
    let (meta, labels) = oof_meta_features(&examples, bits, base, seed)?;
    let stacker = train_stacker(&meta, &labels, l2_strength)?
        .with_trained_at(data_cutoff(records));

    let all_indices: Vec<usize> = (0..examples.len()).collect();
    let mut family_models = Vec::with_capacity(Family::ALL.len());
    for family in Family::ALL {
        let config = TrainConfig {
            c: default_family_c(family),
            ..*base
        };
        let dataset = family_dataset(&examples, &all_indices, family, bits)?;
        let model = train_l1svm(&dataset, &config)?
            .with_trained_at(data_cutoff(records))
            .with_bits(bits);
        family_models.push((family, model));
    }
    Ok(TrainedStack {
        stack: StackModel {
            family_models,
            stacker,
        },
        oof_meta: meta,
        labels,
    })
}

/// Stacked score for one record: per-family decision values fed through the
/// logistic meta-model.
pub fn stack_score_record(
    stack: &StackModel,
    record: &RevisionRecord,
) -> Result<f64, PipelineError> {
    let bag = extract_all(record);
    let mut meta_row = Vec::with_capacity(stack.family_models.len());
    for (family, model) in &stack.family_models {
        let bits = model.bits.ok_or_else(|| {
            PipelineError::Data("family model carries no hash width".to_string())
        })?;
        let vector = hash_vectorize(&bag.filter_family(*family), bits)?.with_intercept();
        meta_row.push(model.score(&vector)?);
    }
    Ok(crate::learn::stacker_score(&stack.stacker, &meta_row)?)
}

/// Scores formatted exactly as the wire protocol emits them.
pub fn format_score(score: f64) -> String {
    format!("{score:.6}")
}
