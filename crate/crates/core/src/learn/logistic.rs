//! L2-regularized logistic regression, used as the stacking meta-learner
//! over per-family model scores.

use super::{LearnError, LinearModel, LossKind};
use crate::vectorize::SparseVector;

/// `log(1 + exp(-m))` without overflow for large |m|.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// Objective `l2/2 * ||w||^2 + sum_i log(1 + exp(-y_i w.x_i))` and its
/// gradient, exposed so tests can check the gradient against finite
/// differences.
pub fn logistic_objective_grad(
    weights: &[f64],
    rows: &[(SparseVector, bool)],
    l2: f64,
) -> (f64, Vec<f64>) {
    let mut objective = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    for (x, label) in rows {
        let y = if *label { 1.0 } else { -1.0 };
        let margin = y * x.dot(weights);
        objective += log1p_exp_neg(margin);
        // d/dw log(1+exp(-y w.x)) = -y sigmoid(-y w.x) x
        let sig = 1.0 / (1.0 + margin.exp());
        let coeff = -y * sig;
        for &(i, v) in x.entries() {
            grad[i as usize] += coeff * f64::from(v);
        }
    }
    (objective, grad)
}

/// Train the stacker on per-example meta-feature rows (one score per
/// first-level model, produced out-of-fold) by full-gradient descent with
/// backtracking line search. An intercept column is appended internally;
/// scores are the linear decision values `w . x`, monotone in the modeled
/// probability.
pub fn train_stacker(
    meta_features: &[Vec<f64>],
    labels: &[bool],
    l2_strength: f64,
) -> Result<LinearModel, LearnError> {
    if meta_features.is_empty() || meta_features.len() != labels.len() {
        return Err(LearnError::EmptyDataset);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(LearnError::SingleClassData);
    }
    if !(l2_strength >= 0.0 && l2_strength.is_finite()) {
        return Err(LearnError::BadParameter("l2_strength must be >= 0".into()));
    }
    let width = meta_features[0].len() as u32;
    let dim = width + 1;
    let mut rows = Vec::with_capacity(meta_features.len());
    for (features, &label) in meta_features.iter().zip(labels) {
        if features.len() as u32 != width {
            return Err(LearnError::DimensionMismatch {
                expected: width,
                got: features.len() as u32,
            });
        }
        let entries = features
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v as f32))
            .collect();
        let vector = SparseVector::from_indices(width, entries).with_intercept();
        rows.push((vector, label));
    }

    let mut weights = vec![0.0f64; dim as usize];
    let (mut objective, mut grad) = logistic_objective_grad(&weights, &rows, l2_strength);
    for _iter in 0..2000 {
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < 1e-10 {
            break;
        }
        // backtracking line search along -grad
        let mut step = 1.0f64;
        let squared_norm: f64 = grad.iter().map(|g| g * g).sum();
        let mut advanced = false;
        for _ in 0..60 {
            let candidate: Vec<f64> = weights
                .iter()
                .zip(&grad)
                .map(|(w, g)| w - step * g)
                .collect();
            let (cand_obj, cand_grad) = logistic_objective_grad(&candidate, &rows, l2_strength);
            if cand_obj <= objective - 0.25 * step * squared_norm {
                weights = candidate;
                objective = cand_obj;
                grad = cand_grad;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
    }

    Ok(LinearModel::new(
        weights,
        None,
        l2_strength,
        LossKind::Logistic,
    ))
}

/// Score a raw meta-feature row with a trained stacker.
pub fn stacker_score(model: &LinearModel, meta_row: &[f64]) -> Result<f64, LearnError> {
    if meta_row.len() + 1 != model.weights.len() {
        return Err(LearnError::DimensionMismatch {
            expected: model.dim(),
            got: meta_row.len() as u32 + 1,
        });
    }
    let mut score = *model.weights.last().expect("stacker has an intercept");
    for (w, v) in model.weights.iter().zip(meta_row) {
        score += w * v;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_auc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfectly_correlated_meta_feature_gives_auc_one() {
        let meta: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }, 0.3])
            .collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
        let model = train_stacker(&meta, &labels, 1.0).unwrap();
        let scores: Vec<f64> = meta
            .iter()
            .map(|row| stacker_score(&model, row).unwrap())
            .collect();
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn constant_meta_features_collapse_to_equal_scores() {
        let labels: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();

        // any constant column scores every example identically
        let meta: Vec<Vec<f64>> = (0..30).map(|_| vec![0.7, 0.7]).collect();
        let model = train_stacker(&meta, &labels, 1.0).unwrap();
        let scores: Vec<f64> = meta
            .iter()
            .map(|row| stacker_score(&model, row).unwrap())
            .collect();
        for s in &scores {
            assert!((s - scores[0]).abs() < 1e-12);
        }

        // a zero column carries no gradient, so L2 pins its weight at zero
        let meta: Vec<Vec<f64>> = (0..30).map(|_| vec![0.0, 0.0]).collect();
        let model = train_stacker(&meta, &labels, 1.0).unwrap();
        assert_eq!(model.weights[0], 0.0);
        assert_eq!(model.weights[1], 0.0);
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let rows: Vec<(SparseVector, bool)> = (0..25)
            .map(|_| {
                let entries = (0..4u32)
                    .map(|i| (i, rng.gen_range(-1.0f32..1.0)))
                    .collect();
                (
                    SparseVector::from_indices(4, entries),
                    rng.gen_bool(0.4),
                )
            })
            .collect();
        let l2 = 0.7;
        for _ in 0..20 {
            let point: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, grad) = logistic_objective_grad(&point, &rows, l2);
            let h = 1e-5;
            for k in 0..4 {
                let mut plus = point.clone();
                plus[k] += h;
                let mut minus = point.clone();
                minus[k] -= h;
                let (f_plus, _) = logistic_objective_grad(&plus, &rows, l2);
                let (f_minus, _) = logistic_objective_grad(&minus, &rows, l2);
                let numeric = (f_plus - f_minus) / (2.0 * h);
                let denom = grad[k].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (grad[k] - numeric).abs() / denom < 1e-6,
                    "grad[{k}] = {} vs numeric {numeric}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn rejects_single_class_and_ragged_rows() {
        let meta = vec![vec![1.0], vec![0.5]];
        assert_eq!(
            train_stacker(&meta, &[true, true], 1.0),
            Err(LearnError::SingleClassData)
        );
        let ragged = vec![vec![1.0], vec![0.5, 0.2]];
        assert!(matches!(
            train_stacker(&ragged, &[true, false], 1.0),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }
}
