//! Counterfactual inference with kernel mean embeddings.
//!
//! This crate estimates and compares outcome distributions under
//! interventions. Distributions are represented as weighted kernel mean
//! embeddings, i.e. RKHS elements of the form Σᵢ βᵢ ℓ(·, yᵢ), and all
//! estimators reduce to linear algebra over Gram matrices.
//!
//! The pieces fit together like this:
//!
//! - [`kernels`]: kernel families, Gram matrices, the median heuristic,
//!   and Nyström low-rank factors.
//! - [`embedding`]: weighted embeddings, inner products, and biased /
//!   unbiased squared-MMD estimators.
//! - [`cme`]: the counterfactual mean embedding estimator
//!   β = (K + nεI)⁻¹ K̃ 1ₘ built on conditional-embedding regression.
//! - [`kte`]: kernel treatment effects — propensity-weighted embeddings
//!   for distributional average effects, and CME-based effects for
//!   assignment and treatment comparisons.
//! - [`herding`]: deterministic sampling from a weighted embedding.
//! - [`hypothesis`]: bootstrap two-sample tests and power studies.
//! - [`ope`]: off-policy evaluation for slate recommendation — kernel
//!   policy evaluation plus direct, wIPS, doubly-robust, and slate
//!   baselines.
//! - [`simgen`]: synthetic data generators with oracle channels.
//! - [`modelsel`]: bias-corrected cross-validation for counterfactual
//!   prediction.

pub mod cme;
pub mod embedding;
mod error;
pub mod herding;
pub mod hypothesis;
pub mod kernels;
pub mod kte;
pub mod modelsel;
pub mod ope;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};

/// Lift a slice of scalars into one-dimensional points.
///
/// Outcomes in the synthetic experiments are scalar; kernel operations
/// work on vectors.
pub fn column(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|&v| vec![v]).collect()
}
