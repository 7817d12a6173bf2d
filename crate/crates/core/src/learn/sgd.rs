//! Online linear SVM: stochastic subgradient descent on the hinge loss with
//! cumulative-penalty L1 shrinkage, training straight from feature bags so
//! the memory footprint is the dense weight vector and nothing else.

use super::{LearnError, LinearModel, LossKind};
use crate::features::FeatureBag;
use crate::vectorize::{hash_vectorize, MAX_BITS, MIN_BITS};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    /// Hash width; the model dimension is `2^bits + 1` (intercept column).
    pub bits: u32,
    /// Learning-rate schedule `eta_t = eta0 / (1 + decay * t)`.
    pub eta0: f64,
    pub decay: f64,
    pub epochs: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Per-example L1 rate; 0 disables regularization. Use
    /// [`l1_alpha_for_c`] to match a batch objective.
    pub l1_alpha: f64,
    /// Replace the final weights with their average over the last epoch.
    pub average_tail: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            bits: crate::vectorize::DEFAULT_BITS,
            eta0: 0.1,
            decay: 1e-4,
            epochs: 1,
            seed: 0,
            l1_alpha: 0.0,
            average_tail: false,
        }
    }
}

/// The per-example L1 rate equivalent to the batch objective
/// `||w||_1 + c * sum_i loss_i` over `n` examples: `1 / (c * n)`.
pub fn l1_alpha_for_c(c: f64, n: usize) -> f64 {
    1.0 / (c * n as f64)
}

/// Train a hinge-loss linear classifier by stochastic subgradient descent.
///
/// One pass per epoch over the examples in a seeded shuffled order. L1
/// regularization uses the cumulative-penalty scheme: the total penalty
/// accrues globally and is settled lazily on the coordinates each example
/// touches, which keeps sparse updates O(nnz). Deterministic given `seed`.
pub fn train_sgd_online(
    examples: &[(FeatureBag, bool)],
    config: &SgdConfig,
) -> Result<LinearModel, LearnError> {
    if examples.is_empty() {
        return Err(LearnError::EmptyStream);
    }
    if !(MIN_BITS..=MAX_BITS).contains(&config.bits) {
        return Err(LearnError::BadParameter(format!(
            "bits {} outside [{MIN_BITS},{MAX_BITS}]",
            config.bits
        )));
    }
    if config.epochs == 0 {
        return Err(LearnError::BadParameter("epochs must be positive".into()));
    }

    let hashed_dim = 1usize << config.bits;
    let dim = hashed_dim + 1; // trailing intercept column
    let mut weights = vec![0.0f64; dim];
    // cumulative-penalty bookkeeping
    let mut total_penalty = 0.0f64;
    let mut applied = vec![0.0f64; dim];

    let vectors: Vec<(crate::vectorize::SparseVector, f64)> = examples
        .iter()
        .map(|(bag, label)| {
            let v = hash_vectorize(bag, config.bits)
                .expect("bits validated above")
                .with_intercept();
            (v, if *label { 1.0 } else { -1.0 })
        })
        .collect();

    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut step = 0u64;
    let mut tail_sum: Option<Vec<f64>> = None;
    let mut tail_steps = 0u64;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let averaging = config.average_tail && epoch + 1 == config.epochs;
        if averaging && tail_sum.is_none() {
            tail_sum = Some(vec![0.0f64; dim]);
        }
        for &example_idx in &order {
            let (vector, y) = &vectors[example_idx];
            let eta = config.eta0 / (1.0 + config.decay * step as f64);
            step += 1;

            let score: f64 = vector
                .entries()
                .iter()
                .map(|&(i, v)| weights[i as usize] * f64::from(v))
                .sum();
            if y * score < 1.0 {
                for &(i, v) in vector.entries() {
                    weights[i as usize] += eta * y * f64::from(v);
                }
            }

            if config.l1_alpha > 0.0 {
                total_penalty += eta * config.l1_alpha;
                for &(i, _) in vector.entries() {
                    let i = i as usize;
                    let z = weights[i];
                    if z > 0.0 {
                        weights[i] = (z - (total_penalty + applied[i])).max(0.0);
                    } else if z < 0.0 {
                        weights[i] = (z + (total_penalty - applied[i])).min(0.0);
                    }
                    applied[i] += weights[i] - z;
                }
            }

            if averaging {
                let sum = tail_sum.as_mut().expect("allocated at epoch start");
                for (acc, w) in sum.iter_mut().zip(&weights) {
                    *acc += w;
                }
                tail_steps += 1;
            }
        }
    }

    if let Some(sum) = tail_sum {
        if tail_steps > 0 {
            weights = sum.into_iter().map(|s| s / tail_steps as f64).collect();
        }
    }

    let equivalent_c = if config.l1_alpha > 0.0 {
        1.0 / (config.l1_alpha * examples.len() as f64)
    } else {
        0.0
    };
    Ok(LinearModel::new(
        weights,
        Some(config.bits),
        equivalent_c,
        LossKind::Hinge,
    ))
}
