//! Cross-validation for counterfactual prediction.
//!
//! Plain K-fold CV on logged data gives a biased estimate of
//! counterfactual performance: the validation rows were collected under
//! the logging distribution, not the target one. The procedure here
//! re-weights each validation fold's rewards (bias correction) before
//! scoring, then averages fold errors (variance reduction).

use crate::rng;
use crate::{Error, Result};
use rand::seq::SliceRandom;

/// Where validation weights come from.
#[derive(Debug, Clone)]
pub enum WeightSource {
    /// Per-row importance ratios (target over logging propensity),
    /// self-normalized within each validation fold.
    Propensity(Vec<f64>),
    /// Explicit per-row validation weights, used as given.
    Provided(Vec<f64>),
}

/// Selection outcome: the chosen grid point and the per-parameter mean
/// CV errors, indexed like the input grid.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub best: f64,
    pub best_index: usize,
    pub mean_errors: Vec<f64>,
}

/// Deterministic fold labels for `n` rows: a seeded permutation dealt
/// round-robin into `folds` groups. Depends only on `(seed, n, folds)`.
pub fn fold_assignment(seed: u64, n: usize, folds: usize) -> Vec<usize> {
    let stream = (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ folds as u64;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, stream));
    let mut labels = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = pos % folds;
    }
    labels
}

/// Select a regularization parameter by bias-corrected K-fold CV.
///
/// For each grid point and fold, `estimate(param, train_rows,
/// validation_rows)` produces the fold's reward estimate; it is scored
/// against the re-weighted validation reward `r* = Σ w_j r_j`, and the
/// squared errors are averaged over folds. Ties between grid points break
/// toward the larger parameter value (stronger regularization).
pub fn counterfactual_cv<F>(
    rewards: &[f64],
    grid: &[f64],
    folds: usize,
    weights: &WeightSource,
    seed: u64,
    mut estimate: F,
) -> Result<CvSelection>
where
    F: FnMut(f64, &[usize], &[usize]) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::EmptyInput("parameter grid"));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let n = rewards.len();
    let labels = fold_assignment(seed, n, folds);
    let mut fold_rows: Vec<Vec<usize>> = vec![Vec::new(); folds];
    for (row, &label) in labels.iter().enumerate() {
        fold_rows[label].push(row);
    }
    for fold in &fold_rows {
        if fold.len() < 2 {
            return Err(Error::Degenerate(format!(
                "fold of size {} is smaller than 2 rows",
                fold.len()
            )));
        }
    }

    // Bias-corrected validation targets are fixed per fold.
    let mut fold_targets: Vec<f64> = Vec::with_capacity(folds);
    let mut train_rows: Vec<Vec<usize>> = Vec::with_capacity(folds);
    for (k, validation) in fold_rows.iter().enumerate() {
        let target = match weights {
            WeightSource::Propensity(ratios) => {
                let total: f64 = validation.iter().map(|&j| ratios[j]).sum();
                if total <= 0.0 {
                    return Err(Error::Degenerate(
                        "propensity ratios sum to zero in a validation fold".into(),
                    ));
                }
                validation
                    .iter()
                    .map(|&j| ratios[j] / total * rewards[j])
                    .sum()
            }
            WeightSource::Provided(w) => validation.iter().map(|&j| w[j] * rewards[j]).sum(),
        };
        fold_targets.push(target);
        train_rows.push(
            (0..n)
                .filter(|row| labels[*row] != k)
                .collect::<Vec<usize>>(),
        );
    }

    let mut mean_errors = Vec::with_capacity(grid.len());
    for &param in grid {
        let mut total = 0.0;
        for k in 0..folds {
            let estimated = estimate(param, &train_rows[k], &fold_rows[k])?;
            let err = estimated - fold_targets[k];
            total += err * err;
        }
        mean_errors.push(total / folds as f64);
    }

    let mut best_index = 0;
    for idx in 1..grid.len() {
        let better = mean_errors[idx] < mean_errors[best_index]
            || (mean_errors[idx] == mean_errors[best_index] && grid[idx] > grid[best_index]);
        if better {
            best_index = idx;
        }
    }
    Ok(CvSelection {
        best: grid[best_index],
        best_index,
        mean_errors,
    })
}
