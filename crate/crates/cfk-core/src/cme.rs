//! Counterfactual mean embedding estimation.
//!
//! Given training pairs (xᵢ, yᵢ) from one regime and target covariates
//! x'ⱼ from another, the counterfactual outcome embedding is estimated as
//! Σᵢ βᵢ ℓ(·, yᵢ) with β = (K + nεI)⁻¹ K̃ 1ₘ: conditional-embedding
//! regression weights averaged over the target covariates. The theory
//! behind the estimator assumes n = m; the formula is well-defined for
//! n ≠ m and both are supported here.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::embedding::WeightedEmbedding;
use crate::kernels::{self, KernelSpec};
use crate::modelsel;
use crate::rng::Rng;
use crate::{Error, Result};

enum Solver {
    /// Cholesky factor of K + nεI.
    Exact(nalgebra::Cholesky<f64, Dyn>),
    /// Low-rank path: K ~ L Lᵀ, systems solved through the Woodbury
    /// identity with the small factor λI + LᵀL.
    Nystrom {
        factor: DMatrix<f64>,
        inner: nalgebra::Cholesky<f64, Dyn>,
        lambda: f64,
    },
}

/// Conditional-embedding regression model with a cached factorization.
///
/// Construction is single-threaded; a built model is immutable and can
/// serve queries concurrently.
pub struct CmeModel {
    covariates: Vec<Vec<f64>>,
    outcomes: Vec<Vec<f64>>,
    covariate_kernel: KernelSpec,
    outcome_kernel: KernelSpec,
    epsilon: f64,
    solver: Solver,
}

impl CmeModel {
    /// Build the exact model: factor K + nεI once.
    pub fn new(
        covariates: Vec<Vec<f64>>,
        outcomes: Vec<Vec<f64>>,
        covariate_kernel: KernelSpec,
        outcome_kernel: KernelSpec,
        epsilon: f64,
    ) -> Result<Self> {
        Self::build(
            covariates,
            outcomes,
            covariate_kernel,
            outcome_kernel,
            epsilon,
            None,
        )
    }

    /// Build with a rank-`rank` Nyström approximation of K. Landmarks are
    /// sampled uniformly without replacement from the training covariates.
    pub fn with_nystrom(
        covariates: Vec<Vec<f64>>,
        outcomes: Vec<Vec<f64>>,
        covariate_kernel: KernelSpec,
        outcome_kernel: KernelSpec,
        epsilon: f64,
        rank: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::build(
            covariates,
            outcomes,
            covariate_kernel,
            outcome_kernel,
            epsilon,
            Some((rank, rng)),
        )
    }

    fn build(
        covariates: Vec<Vec<f64>>,
        outcomes: Vec<Vec<f64>>,
        covariate_kernel: KernelSpec,
        outcome_kernel: KernelSpec,
        epsilon: f64,
        nystrom: Option<(usize, &mut Rng)>,
    ) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::EmptyInput("training covariates"));
        }
        if covariates.len() != outcomes.len() {
            return Err(Error::DimensionMismatch(covariates.len(), outcomes.len()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization must be positive, got {epsilon}"
            )));
        }
        covariate_kernel.validate()?;
        outcome_kernel.validate()?;

        let n = covariates.len();
        let lambda = n as f64 * epsilon;
        let solver = match nystrom {
            None => {
                let mut system = kernels::gram(&covariate_kernel, &covariates, &covariates)?;
                for i in 0..n {
                    system[(i, i)] += lambda;
                }
                Solver::Exact(factor_spd(system)?)
            }
            Some((rank, rng)) => {
                let factor = kernels::nystrom_factor(&covariate_kernel, &covariates, rank, rng)?;
                let r = factor.ncols();
                let mut inner = factor.transpose() * &factor;
                for i in 0..r {
                    inner[(i, i)] += lambda;
                }
                Solver::Nystrom {
                    inner: factor_spd(inner)?,
                    factor,
                    lambda,
                }
            }
        };

        Ok(Self {
            covariates,
            outcomes,
            covariate_kernel,
            outcome_kernel,
            epsilon,
            solver,
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }

    pub fn outcomes(&self) -> &[Vec<f64>] {
        &self.outcomes
    }

    pub fn outcome_kernel(&self) -> &KernelSpec {
        &self.outcome_kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn solve(&self, rhs: DVector<f64>) -> Result<Vec<f64>> {
        let solution = match &self.solver {
            Solver::Exact(chol) => chol.solve(&rhs),
            Solver::Nystrom {
                factor,
                inner,
                lambda,
            } => {
                // (LLᵀ + λI)⁻¹ v = (v − L (λI + LᵀL)⁻¹ Lᵀ v) / λ
                let projected = inner.solve(&(factor.transpose() * &rhs));
                (rhs - factor * projected) / *lambda
            }
        };
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("solver produced non-finite weights".into()));
        }
        Ok(solution.data.into())
    }

    /// Regression weight vector w(x) = (K + nεI)⁻¹ k(x) with
    /// k(x)ᵢ = k(x, xᵢ).
    pub fn conditional_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        let dim = self.covariates[0].len();
        if x.len() != dim {
            return Err(Error::DimensionMismatch(dim, x.len()));
        }
        let rhs = DVector::from_iterator(
            self.len(),
            self.covariates
                .iter()
                .map(|xi| self.covariate_kernel.eval_unchecked(x, xi)),
        );
        self.solve(rhs)
    }

    /// Coefficients β = (K + nεI)⁻¹ K̃ 1ₘ over the training outcomes, for
    /// target covariates x'₁..x'ₘ. Equals the average of
    /// [`Self::conditional_weights`] over the targets.
    pub fn cme_weights(&self, targets: &[Vec<f64>]) -> Result<Vec<f64>> {
        if targets.is_empty() {
            return Err(Error::EmptyInput("target covariates"));
        }
        let dim = self.covariates[0].len();
        let m = targets.len() as f64;
        let mut rhs = DVector::zeros(self.len());
        for target in targets {
            if target.len() != dim {
                return Err(Error::DimensionMismatch(dim, target.len()));
            }
            for (i, xi) in self.covariates.iter().enumerate() {
                rhs[i] += self.covariate_kernel.eval_unchecked(target, xi);
            }
        }
        rhs /= m;
        self.solve(rhs)
    }

    /// The estimated counterfactual embedding Σᵢ βᵢ ℓ(·, yᵢ).
    pub fn counterfactual_embedding(&self, targets: &[Vec<f64>]) -> Result<WeightedEmbedding> {
        let beta = self.cme_weights(targets)?;
        WeightedEmbedding::new(self.outcomes.clone(), beta, self.outcome_kernel.clone())
    }
}

/// Cholesky with one jitter retry: the system is SPD analytically, so a
/// failure means conditioning, and a single diagonal bump of
/// 1e-10 * trace / n is attempted before giving up.
fn factor_spd(matrix: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, Dyn>> {
    let n = matrix.nrows();
    match matrix.clone().cholesky() {
        Some(chol) => Ok(chol),
        None => {
            let jitter = 1e-10 * matrix.trace() / n as f64;
            let mut bumped = matrix;
            for i in 0..n {
                bumped[(i, i)] += jitter;
            }
            bumped
                .cholesky()
                .ok_or_else(|| Error::Numerical("Cholesky failed after jitter retry".into()))
        }
    }
}

/// Grid for ridge-style selection of the covariate bandwidth and the
/// regularization constant by K-fold CV.
#[derive(Debug, Clone)]
pub struct KrrCvConfig {
    pub bandwidths: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

impl Default for KrrCvConfig {
    fn default() -> Self {
        Self {
            bandwidths: vec![0.01, 0.1, 1.0, 10.0],
            epsilons: vec![0.01, 0.1, 1.0, 10.0],
            folds: 5,
            seed: 0,
        }
    }
}

/// Select (bandwidth, epsilon) for a Gaussian-kernel model by K-fold CV,
/// scoring the mean squared error of the scalar ridge prediction of y.
///
/// The weight system is the same one the embedding estimator uses, so
/// this treats the model as kernel ridge regression. Ties prefer the
/// stronger regularization, then the larger bandwidth.
pub fn select_krr_params(
    covariates: &[Vec<f64>],
    outcomes: &[f64],
    config: &KrrCvConfig,
) -> Result<(f64, f64)> {
    if covariates.len() != outcomes.len() {
        return Err(Error::DimensionMismatch(covariates.len(), outcomes.len()));
    }
    if covariates.len() < config.folds {
        return Err(Error::Degenerate(
            "fewer rows than folds in CV grid search".into(),
        ));
    }
    let n = covariates.len();
    let labels = modelsel::fold_assignment(config.seed, n, config.folds);

    let mut best: Option<(f64, f64, f64)> = None; // (error, bandwidth, epsilon)
    for &bandwidth in &config.bandwidths {
        let kernel = KernelSpec::gaussian(bandwidth);
        let full = kernels::gram(&kernel, covariates, covariates)?;
        for &epsilon in &config.epsilons {
            let mut total = 0.0;
            let mut count = 0usize;
            for fold in 0..config.folds {
                let train: Vec<usize> = (0..n).filter(|&i| labels[i] != fold).collect();
                let val: Vec<usize> = (0..n).filter(|&i| labels[i] == fold).collect();
                let nt = train.len();
                let mut system = DMatrix::zeros(nt, nt);
                for (a, &i) in train.iter().enumerate() {
                    for (b, &j) in train.iter().enumerate() {
                        system[(a, b)] = full[(i, j)];
                    }
                    system[(a, a)] += nt as f64 * epsilon;
                }
                let chol = factor_spd(system)?;
                let y_train = DVector::from_iterator(nt, train.iter().map(|&i| outcomes[i]));
                let alpha = chol.solve(&y_train);
                for &j in &val {
                    let prediction: f64 = train
                        .iter()
                        .enumerate()
                        .map(|(a, &i)| full[(i, j)] * alpha[a])
                        .sum();
                    let err = prediction - outcomes[j];
                    total += err * err;
                    count += 1;
                }
            }
            let mse = total / count as f64;
            let better = match best {
                None => true,
                Some((err, bw, eps)) => {
                    mse < err
                        || (mse == err && (epsilon > eps || (epsilon == eps && bandwidth > bw)))
                }
            };
            if better {
                best = Some((mse, bandwidth, epsilon));
            }
        }
    }
    let (_, bandwidth, epsilon) = best.expect("nonempty grid");
    Ok((bandwidth, epsilon))
}
