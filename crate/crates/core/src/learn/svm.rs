//! Batch L1-regularized squared-hinge SVM.
//!
//! Minimizes `F(w) = ||w||_1 + C * sum_i max(0, 1 - y_i w.x_i)^2` by
//! cyclic coordinate descent: a one-dimensional Newton step per coordinate
//! with an Armijo-style backtracking line search evaluated exactly over the
//! coordinate's column. Deterministic: coordinates sweep in ascending index
//! order, no randomness anywhere, so equal inputs give bit-identical models.

use super::{Dataset, LearnError, LinearModel, LossKind, TrainConfig};

const SIGMA: f64 = 0.01;
const BETA: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

/// Exact objective value at `weights`.
pub fn svm_objective(weights: &[f64], dataset: &Dataset, c: f64) -> f64 {
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let loss: f64 = dataset
        .rows()
        .iter()
        .map(|(x, label)| {
            let y = if *label { 1.0 } else { -1.0 };
            let margin = 1.0 - y * x.dot(weights);
            if margin > 0.0 {
                margin * margin
            } else {
                0.0
            }
        })
        .sum();
    l1 + c * loss
}

pub fn train_l1svm(dataset: &Dataset, config: &TrainConfig) -> Result<LinearModel, LearnError> {
    train_l1svm_traced(dataset, config).map(|(model, _)| model)
}

/// Like [`train_l1svm`] but also returns the objective value recorded after
/// every epoch. The trace is non-increasing by construction: every accepted
/// coordinate step strictly decreases the objective.
pub fn train_l1svm_traced(
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<(LinearModel, Vec<f64>), LearnError> {
    if dataset.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let positives = dataset.positives();
    if positives == 0 || positives == dataset.len() {
        return Err(LearnError::SingleClassData);
    }
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(LearnError::BadParameter("c must be positive".into()));
    }
    if !(config.tol > 0.0) {
        return Err(LearnError::BadParameter("tol must be positive".into()));
    }
    if config.max_epochs == 0 {
        return Err(LearnError::BadParameter("max_epochs must be positive".into()));
    }

    let n = dataset.len();
    let dim = dataset.dim() as usize;
    let c = config.c;

    // Column-major view over the nonempty columns; empty columns keep
    // weight 0 under L1 and never need visiting.
    let mut column_rows: std::collections::HashMap<u32, Vec<(u32, f64)>> =
        std::collections::HashMap::new();
    let mut y = Vec::with_capacity(n);
    for (row_idx, (vector, label)) in dataset.rows().iter().enumerate() {
        y.push(if *label { 1.0 } else { -1.0 });
        for &(col, value) in vector.entries() {
            column_rows
                .entry(col)
                .or_default()
                .push((row_idx as u32, f64::from(value)));
        }
    }
    let mut columns: Vec<(u32, Vec<(u32, f64)>)> = column_rows.into_iter().collect();
    columns.sort_unstable_by_key(|&(col, _)| col);

    let mut weights = vec![0.0f64; dim];
    // margins[i] = 1 - y_i * (w . x_i); starts at 1 with w = 0
    let mut margins = vec![1.0f64; n];
    // F(0) = C * n: every example sits at margin 1
    let mut objective = c * n as f64;
    let mut trace = Vec::with_capacity(config.max_epochs);
    let mut previous = objective;

    for _epoch in 0..config.max_epochs {
        for &(col, ref rows) in &columns {
            let j = col as usize;
            let wj = weights[j];

            let mut grad_sum = 0.0;
            let mut curv_sum = 0.0;
            for &(i, v) in rows {
                let m = margins[i as usize];
                if m > 0.0 {
                    grad_sum += y[i as usize] * v * m;
                    curv_sum += v * v;
                }
            }
            let grad = -2.0 * c * grad_sum;
            let curvature = (2.0 * c * curv_sum).max(1e-12);

            // Newton direction of the 1-D piecewise model with the L1 term
            let direction = if grad + 1.0 <= curvature * wj {
                -(grad + 1.0) / curvature
            } else if grad - 1.0 >= curvature * wj {
                -(grad - 1.0) / curvature
            } else {
                -wj
            };
            if direction.abs() < 1e-15 {
                continue;
            }

            let descent_bound = grad * direction + (wj + direction).abs() - wj.abs();
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let step = lambda * direction;
                let mut delta = (wj + step).abs() - wj.abs();
                for &(i, v) in rows {
                    let m_old = margins[i as usize];
                    let m_new = m_old - y[i as usize] * v * step;
                    let l_old = if m_old > 0.0 { m_old * m_old } else { 0.0 };
                    let l_new = if m_new > 0.0 { m_new * m_new } else { 0.0 };
                    delta += c * (l_new - l_old);
                }
                if delta <= SIGMA * lambda * descent_bound {
                    accepted = Some((step, delta));
                    break;
                }
                lambda *= BETA;
            }
            let Some((step, delta)) = accepted else {
                continue;
            };

            weights[j] = wj + step;
            for &(i, v) in rows {
                margins[i as usize] -= y[i as usize] * v * step;
            }
            objective += delta;
        }

        trace.push(objective);
        let decrease = previous - objective;
        if decrease < config.tol * previous.abs().max(1e-12) {
            break;
        }
        previous = objective;
    }

    let model = LinearModel::new(weights, None, c, LossKind::SquaredHinge);
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorize::SparseVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vector(dim: u32, entries: &[(u32, f32)]) -> SparseVector {
        SparseVector::from_indices(dim, entries.iter().map(|&(i, v)| (i, v)).collect())
    }

    /// Brute-force grid/refinement minimizer over the weight box, used as
    /// the independent oracle for tiny instances.
    pub(crate) fn oracle_min_objective(dataset: &Dataset, c: f64) -> f64 {
        let dims = dataset.dim() as usize;
        assert!(dims <= 4, "oracle is exponential in the dimension");
        let grid_points = 9usize;
        let mut center = vec![0.0f64; dims];
        let mut half_width = c * dataset.len() as f64 + 1.0;
        let mut best_value = svm_objective(&center, dataset, c);
        let mut best_point = center.clone();

        for _round in 0..60 {
            let mut idx = vec![0usize; dims];
            loop {
                let candidate: Vec<f64> = (0..dims)
                    .map(|d| {
                        center[d] - half_width
                            + 2.0 * half_width * idx[d] as f64 / (grid_points - 1) as f64
                    })
                    .collect();
                let value = svm_objective(&candidate, dataset, c);
                if value < best_value {
                    best_value = value;
                    best_point = candidate;
                }
                // odometer increment
                let mut d = 0;
                loop {
                    if d == dims {
                        break;
                    }
                    idx[d] += 1;
                    if idx[d] < grid_points {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == dims {
                    break;
                }
            }
            center = best_point.clone();
            half_width *= 0.6;
        }
        best_value
    }

    fn random_tiny_dataset(rng: &mut ChaCha8Rng) -> Dataset {
        loop {
            let dims = rng.gen_range(1..=3u32);
            let n = rng.gen_range(2..=10usize);
            let rows: Vec<(SparseVector, bool)> = (0..n)
                .map(|_| {
                    let entries: Vec<(u32, f32)> = (0..dims)
                        .filter(|_| rng.gen_bool(0.7))
                        .map(|d| (d, 1.0))
                        .collect();
                    (SparseVector::from_indices(dims, entries), rng.gen_bool(0.5))
                })
                .collect();
            let data = Dataset::new(dims, rows).unwrap();
            if data.positives() > 0 && data.negatives() > 0 {
                return data;
            }
        }
    }

    #[test]
    fn separates_a_two_feature_dataset() {
        let rows = vec![
            (vector(2, &[(0, 1.0)]), true),
            (vector(2, &[(1, 1.0)]), false),
        ];
        let data = Dataset::new(2, rows).unwrap();
        let model = train_l1svm(&data, &TrainConfig::with_c(100.0)).unwrap();
        assert!(model.weights[0] > 0.0, "weights {:?}", model.weights);
        assert!(model.weights[1] < 0.0, "weights {:?}", model.weights);
        for (x, label) in data.rows() {
            let score = model.score(x).unwrap();
            assert_eq!(score > 0.0, *label);
        }
    }

    #[test]
    fn small_c_below_subgradient_threshold_gives_zero_weights() {
        // 5 examples over 2 features; at w = 0 the loss gradient is
        // g_j = -2C sum_i y_i x_ij, so w = 0 is optimal iff
        // 2C |sum_i y_i x_ij| <= 1 for every j.
        let rows = vec![
            (vector(2, &[(0, 1.0)]), true),
            (vector(2, &[(0, 1.0), (1, 1.0)]), true),
            (vector(2, &[(1, 1.0)]), false),
            (vector(2, &[(0, 1.0)]), false),
            (vector(2, &[(1, 1.0)]), false),
        ];
        let data = Dataset::new(2, rows).unwrap();
        // per-feature label sums: feature 0 -> +1, feature 1 -> -1
        let max_abs_sum = 1.0f64;
        let c_zero = 1.0 / (2.0 * max_abs_sum);
        let model = train_l1svm(&data, &TrainConfig::with_c(0.9 * c_zero)).unwrap();
        assert!(model.weights.iter().all(|&w| w == 0.0), "{:?}", model.weights);
        // and just above the threshold the solver moves off zero
        let model = train_l1svm(&data, &TrainConfig::with_c(1.5 * c_zero)).unwrap();
        assert!(model.weights.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn objective_never_exceeds_the_zero_vector_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let data = random_tiny_dataset(&mut rng);
            let c = [0.05, 0.5, 5.0][rng.gen_range(0..3)];
            let (model, trace) = train_l1svm_traced(&data, &TrainConfig::with_c(c)).unwrap();
            let bound = c * data.len() as f64;
            let final_objective = svm_objective(&model.weights, &data, c);
            assert!(final_objective <= bound + 1e-9);
            assert!(trace.iter().all(|&o| o <= bound + 1e-9));
        }
    }

    #[test]
    fn objective_is_monotone_across_epochs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let data = random_tiny_dataset(&mut rng);
            let (_, trace) = train_l1svm_traced(&data, &TrainConfig::with_c(2.0)).unwrap();
            for pair in trace.windows(2) {
                assert!(pair[1] <= pair[0], "trace not monotone: {trace:?}");
            }
        }
    }

    #[test]
    fn matches_brute_force_oracle_on_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..10 {
            let data = random_tiny_dataset(&mut rng);
            let c = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
            let config = TrainConfig {
                c,
                max_epochs: 5000,
                tol: 1e-13,
                seed: 0,
            };
            let model = train_l1svm(&data, &config).unwrap();
            let solved = svm_objective(&model.weights, &data, c);
            let oracle = oracle_min_objective(&data, c);
            assert!(
                (solved - oracle).abs() <= 1e-6,
                "case {case}: solver {solved} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = random_tiny_dataset(&mut rng);
        let config = TrainConfig::with_c(3.0);
        let a = train_l1svm(&data, &config).unwrap();
        let b = train_l1svm(&data, &config).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let rows = vec![(vector(1, &[(0, 1.0)]), true)];
        let data = Dataset::new(1, rows).unwrap();
        assert_eq!(
            train_l1svm(&data, &TrainConfig::default()),
            Err(LearnError::SingleClassData)
        );
        let empty = Dataset::new(1, Vec::new()).unwrap();
        assert_eq!(
            train_l1svm(&empty, &TrainConfig::default()),
            Err(LearnError::EmptyDataset)
        );
        let rows = vec![
            (vector(1, &[(0, 1.0)]), true),
            (vector(1, &[]), false),
        ];
        let data = Dataset::new(1, rows).unwrap();
        assert!(matches!(
            train_l1svm(&data, &TrainConfig { c: -1.0, ..TrainConfig::default() }),
            Err(LearnError::BadParameter(_))
        ));
    }
}
