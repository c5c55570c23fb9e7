//! Kernel herding: deterministic greedy sampling from a weighted
//! embedding.
//!
//! The first point maximizes the embedding as a function,
//! h(y) = Σᵢ βᵢ ℓ(yᵢ, y); each later point t maximizes
//! h(y) − (1/(t+1)) Σ_{i<t} ℓ(ỹᵢ, y). The argmax over the whole outcome
//! space is replaced by a scan over a candidate set; revisits are allowed
//! and ties break toward the lowest candidate index, so the output is a
//! deterministic function of the embedding and the candidates.

use crate::embedding::WeightedEmbedding;
use crate::kernels::KernelSpec;
use crate::{Error, Result};

/// Where the per-step argmax searches.
#[derive(Debug, Clone)]
pub enum CandidateSearch {
    /// A caller-supplied candidate set.
    FixedGrid(Vec<Vec<f64>>),
    /// The embedding's own support points.
    TrainingSupport,
    /// A grid scan followed by per-step coordinate-descent refinement
    /// around the grid argmax.
    GridPlusLocalRefine {
        grid: Vec<Vec<f64>>,
        refine_steps: usize,
    },
}

/// Default candidate strategy for an embedding: a 512-point grid spanning
/// [min - sigma, max + sigma] for one-dimensional outcomes (sigma the
/// kernel bandwidth where the kernel has one, otherwise the support's
/// standard deviation), and the training support in higher dimensions.
pub fn default_search(embedding: &WeightedEmbedding) -> CandidateSearch {
    let dim = embedding.points()[0].len();
    if dim != 1 {
        return CandidateSearch::TrainingSupport;
    }
    let values: Vec<f64> = embedding.points().iter().map(|p| p[0]).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sigma = match embedding.kernel() {
        KernelSpec::Gaussian { bandwidth } | KernelSpec::Laplace { bandwidth } => *bandwidth,
        _ => {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / values.len() as f64;
            var.sqrt().max(1e-12)
        }
    };
    let lo = min - sigma;
    let hi = max + sigma;
    let count = 512usize;
    let grid = (0..count)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (count - 1) as f64])
        .collect();
    CandidateSearch::FixedGrid(grid)
}

/// Generate `m` points approximating the embedding's distribution.
pub fn herd(
    embedding: &WeightedEmbedding,
    m: usize,
    search: &CandidateSearch,
) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidParameter("herd count must be >= 1".into()));
    }
    let (candidates, refine_steps): (Vec<Vec<f64>>, usize) = match search {
        CandidateSearch::FixedGrid(grid) => (grid.clone(), 0),
        CandidateSearch::TrainingSupport => (embedding.points().to_vec(), 0),
        CandidateSearch::GridPlusLocalRefine { grid, refine_steps } => {
            (grid.clone(), *refine_steps)
        }
    };
    if candidates.is_empty() {
        return Err(Error::EmptyInput("herding candidate set"));
    }
    let dim = embedding.points()[0].len();
    for c in &candidates {
        if c.len() != dim {
            return Err(Error::DimensionMismatch(dim, c.len()));
        }
    }
    let kernel = embedding.kernel().clone();

    // Attraction term per candidate, fixed across steps.
    let attraction: Vec<f64> = candidates
        .iter()
        .map(|c| embedding.evaluate(c))
        .collect::<Result<_>>()?;
    // Running repulsion Σ_{i<t} l(y_i, c), updated after each pick.
    let mut repulsion = vec![0.0f64; candidates.len()];

    let base_step = refine_base_step(&candidates);
    let mut picks: Vec<Vec<f64>> = Vec::with_capacity(m);
    for t in 1..=m {
        let damping = 1.0 / (t as f64 + 1.0);
        let mut best_idx = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (idx, (&a, &r)) in attraction.iter().zip(&repulsion).enumerate() {
            let score = if t == 1 { a } else { a - damping * r };
            if score > best_score {
                best_score = score;
                best_idx = idx;
            }
        }
        let mut pick = candidates[best_idx].clone();
        if refine_steps > 0 {
            pick = refine(
                embedding,
                &picks,
                pick,
                best_score,
                t,
                &base_step,
                refine_steps,
            )?;
        }
        for (r, c) in repulsion.iter_mut().zip(&candidates) {
            *r += kernel.eval_unchecked(&pick, c);
        }
        picks.push(pick);
    }
    Ok(picks)
}

/// Half the per-coordinate grid extent divided by the grid size; a
/// deterministic starting step for coordinate descent.
fn refine_base_step(candidates: &[Vec<f64>]) -> Vec<f64> {
    let dim = candidates[0].len();
    let mut step = vec![0.0; dim];
    for j in 0..dim {
        let lo = candidates.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min);
        let hi = candidates
            .iter()
            .map(|c| c[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let denom = (candidates.len().max(2) - 1) as f64;
        step[j] = ((hi - lo) / denom).max(1e-12);
    }
    step
}

fn herding_objective(
    embedding: &WeightedEmbedding,
    picks: &[Vec<f64>],
    point: &[f64],
    t: usize,
) -> Result<f64> {
    let mut score = embedding.evaluate(point)?;
    if t > 1 {
        let damping = 1.0 / (t as f64 + 1.0);
        let kernel = embedding.kernel();
        let repulsion: f64 = picks
            .iter()
            .map(|p| kernel.eval_unchecked(p, point))
            .sum();
        score -= damping * repulsion;
    }
    Ok(score)
}

fn refine(
    embedding: &WeightedEmbedding,
    picks: &[Vec<f64>],
    mut point: Vec<f64>,
    mut best: f64,
    t: usize,
    base_step: &[f64],
    rounds: usize,
) -> Result<Vec<f64>> {
    let mut scale = 0.5;
    for _ in 0..rounds {
        for j in 0..point.len() {
            for direction in [-1.0, 1.0] {
                let mut trial = point.clone();
                trial[j] += direction * base_step[j] * scale;
                let score = herding_objective(embedding, picks, &trial, t)?;
                if score > best {
                    best = score;
                    point = trial;
                }
            }
        }
        scale *= 0.5;
    }
    Ok(point)
}
