//! Kernel treatment effects.
//!
//! Distributional average treatment effects are measured as the RKHS
//! distance between inverse-propensity-weighted embeddings of the two
//! potential-outcome distributions. Assignment- and treatment-caused
//! effects replace the unobservable side with a counterfactual embedding
//! estimate. All squared statistics are expansions of the biased squared
//! MMD between the corresponding weighted embeddings.

use serde::{Deserialize, Serialize};

use crate::embedding::{self, WeightedEmbedding};
use crate::kernels::KernelSpec;
use crate::{Error, Result};

/// Propensities are clipped into [delta, 1 - delta].
const PROPENSITY_CLIP: f64 = 1e-6;

/// Map from covariates to treatment probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PropensityModel {
    /// Known logistic model `e(x) = sigmoid(coefficients . x + intercept)`.
    Logistic {
        coefficients: Vec<f64>,
        intercept: f64,
    },
    /// Constant propensity, as in a randomized design.
    Constant(f64),
}

impl PropensityModel {
    pub fn validate(&self) -> Result<()> {
        if let PropensityModel::Constant(p) = self {
            if !(p.is_finite() && *p > 0.0 && *p < 1.0) {
                return Err(Error::InvalidPropensity(*p));
            }
        }
        Ok(())
    }

    /// Evaluate e(x), clipped away from 0 and 1.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let raw = match self {
            PropensityModel::Logistic {
                coefficients,
                intercept,
            } => {
                let z: f64 = coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
                    + intercept;
                1.0 / (1.0 + (-z).exp())
            }
            PropensityModel::Constant(p) => *p,
        };
        raw.clamp(PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
    }
}

/// Observed records (xᵢ, tᵢ, yᵢ) with binary treatments.
#[derive(Debug, Clone)]
pub struct ObservationalDataset {
    pub covariates: Vec<Vec<f64>>,
    pub treatments: Vec<bool>,
    pub outcomes: Vec<Vec<f64>>,
}

impl ObservationalDataset {
    pub fn new(
        covariates: Vec<Vec<f64>>,
        treatments: Vec<bool>,
        outcomes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if covariates.len() != treatments.len() || covariates.len() != outcomes.len() {
            return Err(Error::DimensionMismatch(covariates.len(), outcomes.len()));
        }
        if covariates.is_empty() {
            return Err(Error::EmptyInput("observational dataset"));
        }
        Ok(Self {
            covariates,
            treatments,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariates.is_empty()
    }
}

/// Weight normalization for the inverse-propensity embeddings.
///
/// `Raw` divides by the total row count, under which weights need not
/// sum to one in finite samples; the unbiasedness and rate guarantees
/// are about this form. `SelfNormalized` divides each arm's weights by
/// their sum, which makes the randomized-design case reduce exactly to
/// the uniform empirical embeddings and is the stable default for
/// testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    Raw,
    SelfNormalized,
}

/// The pair of inverse-propensity-weighted potential-outcome embeddings.
#[derive(Debug, Clone)]
pub struct IpwEmbeddings {
    /// Embedding estimate for the outcome distribution under treatment.
    pub treated: WeightedEmbedding,
    /// Embedding estimate for the outcome distribution under control.
    pub control: WeightedEmbedding,
}

/// Inverse-propensity-weighted embeddings of both potential-outcome
/// distributions.
///
/// Raw treated weights are `1/(N e(x_i))` over rows with t=1 and control
/// weights `1/(N (1 - e(x_j)))` over rows with t=0, with N the total row
/// count: dividing by the full count (rather than the arm count) is what
/// makes the estimator's expectation the true embedding. Self-normalized
/// weights divide each arm by its weight sum instead.
pub fn ipw_embeddings(
    data: &ObservationalDataset,
    propensity: &PropensityModel,
    outcome_kernel: &KernelSpec,
    normalization: Normalization,
) -> Result<IpwEmbeddings> {
    propensity.validate()?;
    outcome_kernel.validate()?;

    let mut treated_points = Vec::new();
    let mut treated_weights = Vec::new();
    let mut control_points = Vec::new();
    let mut control_weights = Vec::new();
    for i in 0..data.len() {
        let e = propensity.eval(&data.covariates[i]);
        if data.treatments[i] {
            treated_points.push(data.outcomes[i].clone());
            treated_weights.push(1.0 / e);
        } else {
            control_points.push(data.outcomes[i].clone());
            control_weights.push(1.0 / (1.0 - e));
        }
    }
    if treated_points.is_empty() {
        return Err(Error::EmptyArm("treated"));
    }
    if control_points.is_empty() {
        return Err(Error::EmptyArm("control"));
    }
    finalize_arm(&mut treated_weights, data.len(), normalization);
    finalize_arm(&mut control_weights, data.len(), normalization);

    Ok(IpwEmbeddings {
        treated: WeightedEmbedding::new(treated_points, treated_weights, outcome_kernel.clone())?,
        control: WeightedEmbedding::new(control_points, control_weights, outcome_kernel.clone())?,
    })
}

fn finalize_arm(weights: &mut [f64], total_rows: usize, normalization: Normalization) {
    match normalization {
        Normalization::Raw => {
            for w in weights.iter_mut() {
                *w /= total_rows as f64;
            }
        }
        Normalization::SelfNormalized => {
            let total: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
    }
}

/// Squared distributional-average-treatment-effect statistic: the squared
/// RKHS distance between the two inverse-propensity embeddings, clamped
/// at zero.
pub fn kte_date_squared(
    data: &ObservationalDataset,
    propensity: &PropensityModel,
    outcome_kernel: &KernelSpec,
    normalization: Normalization,
) -> Result<f64> {
    let arms = ipw_embeddings(data, propensity, outcome_kernel, normalization)?;
    embedding::squared_mmd_biased(&arms.treated, &arms.control)
}

/// Squared effect of the assignment mechanism: distance between the
/// counterfactual embedding estimate and the uniform embedding of `n`
/// observed control outcomes, clamped at zero.
pub fn kte_assignment_squared(
    cme_estimate: &WeightedEmbedding,
    control_outcomes: &[Vec<f64>],
    outcome_kernel: &KernelSpec,
) -> Result<f64> {
    effect_vs_uniform(cme_estimate, control_outcomes, outcome_kernel)
}

/// Squared effect of treatment on the treated: distance between the
/// counterfactual embedding estimate and the uniform embedding of
/// observed treated outcomes, clamped at zero.
pub fn kte_treated_squared(
    cme_estimate: &WeightedEmbedding,
    treated_outcomes: &[Vec<f64>],
    outcome_kernel: &KernelSpec,
) -> Result<f64> {
    effect_vs_uniform(cme_estimate, treated_outcomes, outcome_kernel)
}

fn effect_vs_uniform(
    cme_estimate: &WeightedEmbedding,
    observed: &[Vec<f64>],
    outcome_kernel: &KernelSpec,
) -> Result<f64> {
    if outcome_kernel != cme_estimate.kernel() {
        return Err(Error::KernelMismatch);
    }
    let uniform = WeightedEmbedding::empirical(outcome_kernel.clone(), observed)?;
    embedding::squared_mmd_biased(&uniform, cme_estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;

    fn gaussian() -> KernelSpec {
        KernelSpec::gaussian(1.0)
    }

    fn half() -> PropensityModel {
        PropensityModel::Constant(0.5)
    }

    #[test]
    fn randomized_design_weights() {
        // e = 1/2: raw weights are 2/N; self-normalized weights are 1/n_t.
        let data = ObservationalDataset::new(
            column(&[0.0, 1.0, 2.0, 3.0]),
            vec![true, true, true, false],
            column(&[0.1, 0.2, 0.3, 0.4]),
        )
        .unwrap();
        let raw = ipw_embeddings(&data, &half(), &gaussian(), Normalization::Raw).unwrap();
        for &w in raw.treated.weights() {
            assert_abs_diff_eq!(w, 2.0 / 4.0, epsilon = 1e-12);
        }
        let sn =
            ipw_embeddings(&data, &half(), &gaussian(), Normalization::SelfNormalized).unwrap();
        for &w in sn.treated.weights() {
            assert_abs_diff_eq!(w, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_row_weights() {
        let data = ObservationalDataset::new(
            column(&[0.0, 1.0]),
            vec![true, false],
            column(&[0.5, -0.5]),
        )
        .unwrap();
        let e = PropensityModel::Constant(0.8);
        let raw = ipw_embeddings(&data, &e, &gaussian(), Normalization::Raw).unwrap();
        assert_abs_diff_eq!(raw.treated.weights()[0], 1.0 / (2.0 * 0.8), epsilon = 1e-12);
        assert_abs_diff_eq!(raw.control.weights()[0], 1.0 / (2.0 * 0.2), epsilon = 1e-12);
        let sn = ipw_embeddings(&data, &e, &gaussian(), Normalization::SelfNormalized).unwrap();
        assert_abs_diff_eq!(sn.treated.weights()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sn.control.weights()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_arm_is_rejected() {
        let data = ObservationalDataset::new(
            column(&[0.0, 1.0]),
            vec![true, true],
            column(&[0.5, -0.5]),
        )
        .unwrap();
        assert!(matches!(
            ipw_embeddings(&data, &half(), &gaussian(), Normalization::Raw),
            Err(Error::EmptyArm("control"))
        ));
    }

    #[test]
    fn invalid_constant_propensity_is_rejected() {
        let data = ObservationalDataset::new(
            column(&[0.0, 1.0]),
            vec![true, false],
            column(&[0.5, -0.5]),
        )
        .unwrap();
        let e = PropensityModel::Constant(1.0);
        assert!(ipw_embeddings(&data, &e, &gaussian(), Normalization::Raw).is_err());
    }

    #[test]
    fn logistic_propensity_is_clipped_sigmoid() {
        let e = PropensityModel::Logistic {
            coefficients: vec![1.0, -1.0],
            intercept: 0.5,
        };
        let z: f64 = 0.5 + 2.0 - 1.0;
        assert_abs_diff_eq!(e.eval(&[2.0, 1.0]), 1.0 / (1.0 + (-z).exp()), epsilon = 1e-12);
        let extreme = PropensityModel::Logistic {
            coefficients: vec![1000.0],
            intercept: 0.0,
        };
        assert_eq!(extreme.eval(&[1.0]), 1.0 - 1e-6);
    }

    #[test]
    fn date_vanishes_for_identical_arms() {
        let data = ObservationalDataset::new(
            column(&[0.0, 1.0, 2.0, 3.0]),
            vec![true, false, true, false],
            column(&[0.7, 0.7, -0.3, -0.3]),
        )
        .unwrap();
        for norm in [Normalization::Raw, Normalization::SelfNormalized] {
            let d = kte_date_squared(&data, &half(), &gaussian(), norm).unwrap();
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_kernel_date_is_squared_weighted_mean_difference() {
        let mut r = rng::root(6);
        let n = 14;
        let covariates: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-1.0..1.0)]).collect();
        let treatments: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let outcomes: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let data =
            ObservationalDataset::new(covariates, treatments.clone(), column(&outcomes)).unwrap();

        let d = kte_date_squared(
            &data,
            &half(),
            &KernelSpec::Linear,
            Normalization::SelfNormalized,
        )
        .unwrap();
        let m1: f64 = outcomes
            .iter()
            .zip(&treatments)
            .filter(|(_, &t)| t)
            .map(|(y, _)| y)
            .sum::<f64>()
            / treatments.iter().filter(|&&t| t).count() as f64;
        let m0: f64 = outcomes
            .iter()
            .zip(&treatments)
            .filter(|(_, &t)| !t)
            .map(|(y, _)| y)
            .sum::<f64>()
            / treatments.iter().filter(|&&t| !t).count() as f64;
        assert_abs_diff_eq!(d, (m1 - m0) * (m1 - m0), epsilon = 1e-10);
    }

    /// Literal triple kernel sum over all rows with indicator weights and
    /// raw inverse-propensity factors (1/N normalization per arm).
    fn date_double_loop_oracle(
        data: &ObservationalDataset,
        e: &PropensityModel,
        kernel: &KernelSpec,
    ) -> f64 {
        let n = data.len() as f64;
        let mut t_term = 0.0;
        let mut cross = 0.0;
        let mut c_term = 0.0;
        for i in 0..data.len() {
            let ei = e.eval(&data.covariates[i]);
            let ti = data.treatments[i] as u8 as f64;
            for j in 0..data.len() {
                let ej = e.eval(&data.covariates[j]);
                let tj = data.treatments[j] as u8 as f64;
                let l = kernel.eval(&data.outcomes[i], &data.outcomes[j]).unwrap();
                t_term += ti * tj * l / (ei * ej);
                cross += ti * (1.0 - tj) * l / (ei * (1.0 - ej));
                c_term += (1.0 - ti) * (1.0 - tj) * l / ((1.0 - ei) * (1.0 - ej));
            }
        }
        ((t_term - 2.0 * cross + c_term) / (n * n)).max(0.0)
    }

    #[test]
    fn date_matches_double_loop_oracle() {
        let mut r = rng::root(31);
        for trial in 0..4 {
            let n = 8 + trial * 4;
            let covariates: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-1.0..1.0)]).collect();
            let treatments: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
            let outcomes: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-2.0..2.0)]).collect();
            let data = ObservationalDataset::new(covariates, treatments, outcomes).unwrap();
            let e = PropensityModel::Logistic {
                coefficients: vec![0.8],
                intercept: -0.1,
            };
            let got = kte_date_squared(&data, &e, &gaussian(), Normalization::Raw).unwrap();
            let want = date_double_loop_oracle(&data, &e, &gaussian());
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn assignment_effect_examples() {
        // Estimate equal to the uniform embedding of the observed sample.
        let sample = column(&[0.1, -0.4, 0.9]);
        let uniform = WeightedEmbedding::empirical(gaussian(), &sample).unwrap();
        let zero = kte_assignment_squared(&uniform, &sample, &gaussian()).unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-12);

        // Point mass at 2 against observed {0} under the linear kernel.
        let point = WeightedEmbedding::new(column(&[2.0]), vec![1.0], KernelSpec::Linear).unwrap();
        let d = kte_assignment_squared(&point, &column(&[0.0]), &KernelSpec::Linear).unwrap();
        assert_abs_diff_eq!(d, 4.0, epsilon = 1e-12);

        assert!(matches!(
            kte_assignment_squared(&point, &column(&[0.0]), &gaussian()),
            Err(Error::KernelMismatch)
        ));
    }

    /// Literal three-term expansion with explicit coefficient sums.
    fn effect_triple_sum_oracle(
        estimate: &WeightedEmbedding,
        observed: &[Vec<f64>],
        kernel: &KernelSpec,
    ) -> f64 {
        let n = observed.len() as f64;
        let mut first = 0.0;
        for yi in observed {
            for yj in observed {
                first += kernel.eval(yi, yj).unwrap();
            }
        }
        first /= n * n;
        let mut second = 0.0;
        for yi in observed {
            for (yj, &bj) in estimate.points().iter().zip(estimate.weights()) {
                second += bj * kernel.eval(yi, yj).unwrap();
            }
        }
        second *= 2.0 / n;
        let mut third = 0.0;
        for (yi, &bi) in estimate.points().iter().zip(estimate.weights()) {
            for (yj, &bj) in estimate.points().iter().zip(estimate.weights()) {
                third += bi * bj * kernel.eval(yi, yj).unwrap();
            }
        }
        (first - second + third).max(0.0)
    }

    #[test]
    fn assignment_and_treated_effects_match_triple_sum_oracle() {
        let mut r = rng::root(40);
        let points: Vec<Vec<f64>> = (0..12).map(|_| vec![r.gen_range(-2.0..2.0)]).collect();
        let weights: Vec<f64> = (0..12).map(|_| r.gen_range(-0.5..0.8)).collect();
        let estimate = WeightedEmbedding::new(points, weights, gaussian()).unwrap();
        let observed: Vec<Vec<f64>> = (0..9).map(|_| vec![r.gen_range(-2.0..2.0)]).collect();

        let want = effect_triple_sum_oracle(&estimate, &observed, &gaussian());
        let assignment = kte_assignment_squared(&estimate, &observed, &gaussian()).unwrap();
        let treated = kte_treated_squared(&estimate, &observed, &gaussian()).unwrap();
        assert_abs_diff_eq!(assignment, want, epsilon = 1e-12);
        assert_abs_diff_eq!(treated, want, epsilon = 1e-12);
    }
}
