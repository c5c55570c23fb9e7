//! Kernel families, Gram matrices, bandwidth selection, and Nyström
//! low-rank approximation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

/// Eigenvalues of a landmark block below this are treated as zero when
/// pseudo-inverting in the Nyström factorization.
const NYSTROM_EIG_CLIP: f64 = 1e-12;

/// A positive-definite kernel family with its hyperparameters.
///
/// The Laplace kernel uses `exp(-||x-x'||_1 / (2 sigma^2))`: the
/// bandwidth enters squared, unlike the more common `exp(-||.||_1 / sigma)`
/// convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelSpec {
    /// `exp(-||x-x'||_2^2 / (2 sigma^2))`
    Gaussian { bandwidth: f64 },
    /// `exp(-||x-x'||_1 / (2 sigma^2))`
    Laplace { bandwidth: f64 },
    /// `<x, x'>`
    Linear,
    /// `(<x, x'> + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `left(x[..split], x'[..split]) * right(x[split..], x'[split..])`
    ///
    /// Product of kernels on complementary coordinate blocks, as used for
    /// joint context-action inputs in policy evaluation.
    Product {
        left: Box<KernelSpec>,
        right: Box<KernelSpec>,
        split: usize,
    },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        KernelSpec::Gaussian { bandwidth }
    }

    pub fn laplace(bandwidth: f64) -> Self {
        KernelSpec::Laplace { bandwidth }
    }

    pub fn polynomial(degree: u32, offset: f64) -> Self {
        KernelSpec::Polynomial { degree, offset }
    }

    pub fn product(left: KernelSpec, right: KernelSpec, split: usize) -> Self {
        KernelSpec::Product {
            left: Box::new(left),
            right: Box::new(right),
            split,
        }
    }

    /// Check hyperparameter constraints.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { bandwidth } | KernelSpec::Laplace { bandwidth } => {
                if !(bandwidth.is_finite() && *bandwidth > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bandwidth must be positive, got {bandwidth}"
                    )));
                }
            }
            KernelSpec::Linear => {}
            KernelSpec::Polynomial { degree, offset } => {
                if *degree < 1 {
                    return Err(Error::InvalidParameter("degree must be >= 1".into()));
                }
                if !(offset.is_finite() && *offset >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "offset must be nonnegative, got {offset}"
                    )));
                }
            }
            KernelSpec::Product { left, right, .. } => {
                left.validate()?;
                right.validate()?;
            }
        }
        Ok(())
    }

    /// Evaluate `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(x.len(), y.len()));
        }
        self.validate()?;
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluate without re-validating; inputs must share a dimension and
    /// the kernel parameters must already be valid.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { bandwidth } => {
                let sq: f64 = x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| {
                        let d = a - b;
                        d * d
                    })
                    .sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Laplace { bandwidth } => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Polynomial { degree, offset } => {
                (dot(x, y) + offset).powi(*degree as i32)
            }
            KernelSpec::Product { left, right, split } => {
                let s = *split;
                left.eval_unchecked(&x[..s], &y[..s]) * right.eval_unchecked(&x[s..], &y[s..])
            }
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn check_points(points: &[Vec<f64>], what: &'static str) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput(what))?;
    let dim = first.len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch(dim, p.len()));
        }
    }
    Ok(dim)
}

/// Gram matrix `entries[i][j] = k(rows[i], cols[j])`.
///
/// When `rows` and `cols` are the same point set the result is symmetric
/// and positive semidefinite up to numerical tolerance.
pub fn gram(spec: &KernelSpec, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let rd = check_points(rows, "gram rows")?;
    let cd = check_points(cols, "gram cols")?;
    if rd != cd {
        return Err(Error::DimensionMismatch(rd, cd));
    }
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            out[(i, j)] = spec.eval_unchecked(r, c);
        }
    }
    Ok(out)
}

/// Bandwidth from the median heuristic.
///
/// Returns sigma with `sigma^2 = median{||x_i - x_j||_2^2, i < j}`. A zero
/// median falls back to the smallest positive pairwise squared distance;
/// all-identical points are an error.
pub fn median_heuristic(points: &[Vec<f64>]) -> Result<f64> {
    check_points(points, "median_heuristic")?;
    if points.len() < 2 {
        return Err(Error::Degenerate(
            "median heuristic needs at least 2 points".into(),
        ));
    }
    let mut sq = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| {
                    let d = a - b;
                    d * d
                })
                .sum();
            sq.push(d);
        }
    }
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sq.len() / 2;
    let median = if sq.len() % 2 == 1 {
        sq[mid]
    } else {
        0.5 * (sq[mid - 1] + sq[mid])
    };
    let sigma_sq = if median > 0.0 {
        median
    } else {
        match sq.iter().copied().find(|&d| d > 0.0) {
            Some(d) => d,
            None => {
                return Err(Error::Degenerate(
                    "all points identical; bandwidth undefined".into(),
                ))
            }
        }
    };
    Ok(sigma_sq.sqrt())
}

/// Nyström factor `L` (n x r) with `L L^T ~ K`.
///
/// Landmarks are drawn uniformly without replacement; for a fixed RNG the
/// landmark sets at increasing ranks are nested (prefixes of one
/// permutation), so the approximation error is nonincreasing in `r`. The
/// landmark block is pseudo-inverted by clipping eigenvalues below 1e-12.
pub fn nystrom_factor(
    spec: &KernelSpec,
    points: &[Vec<f64>],
    rank: usize,
    rng: &mut Rng,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_points(points, "nystrom_factor")?;
    let n = points.len();
    if rank == 0 || rank > n {
        return Err(Error::InvalidParameter(format!(
            "rank must be in 1..={n}, got {rank}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let landmarks: Vec<Vec<f64>> = order[..rank].iter().map(|&i| points[i].clone()).collect();

    let k_nl = gram(spec, points, &landmarks)?;
    let k_ll = gram(spec, &landmarks, &landmarks)?;

    // L = K_nl * U * diag(lambda_i^{-1/2}) over retained eigenvalues, so
    // L L^T = K_nl (K_ll)^+ K_nl^T.
    let eig = k_ll.symmetric_eigen();
    let mut cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > NYSTROM_EIG_CLIP {
            let u = eig.eigenvectors.column(idx);
            cols.push(&k_nl * (u / lambda.sqrt()));
        }
    }
    if cols.is_empty() {
        return Err(Error::Numerical(
            "landmark block has no eigenvalue above the clip threshold".into(),
        ));
    }
    Ok(DMatrix::from_columns(&cols))
}
