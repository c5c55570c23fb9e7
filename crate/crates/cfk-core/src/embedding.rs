//! Weighted kernel mean embeddings and MMD estimators.
//!
//! An embedding is a finite RKHS element Σᵢ βᵢ ℓ(·, yᵢ). Uniform weights
//! give the empirical mean embedding of a sample; conditional-embedding
//! regression produces general (possibly negative) weights.

use serde::{Deserialize, Serialize};

use crate::kernels::KernelSpec;
use crate::{Error, Result};

/// A finite-representation RKHS element Σᵢ βᵢ ℓ(·, yᵢ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedEmbedding {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    kernel: KernelSpec,
}

impl WeightedEmbedding {
    /// Embedding with explicit coefficients. Weights may be negative and
    /// need not sum to one.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("embedding points"));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch(points.len(), weights.len()));
        }
        kernel.validate()?;
        let dim = points[0].len();
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
        }
        Ok(Self {
            points,
            weights,
            kernel,
        })
    }

    /// Empirical mean embedding of a sample: weights all `1/n`.
    pub fn empirical(kernel: KernelSpec, sample: &[Vec<f64>]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptyInput("embedding sample"));
        }
        let w = 1.0 / sample.len() as f64;
        Self::new(sample.to_vec(), vec![w; sample.len()], kernel)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pointwise evaluation Σᵢ βᵢ ℓ(yᵢ, y) of the embedding as a function.
    pub fn evaluate(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.points[0].len() {
            return Err(Error::DimensionMismatch(self.points[0].len(), y.len()));
        }
        Ok(self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, &b)| b * self.kernel.eval_unchecked(p, y))
            .sum())
    }
}

/// RKHS inner product Σᵢⱼ βᵢ^A βⱼ^B ℓ(yᵢ^A, yⱼ^B).
///
/// Both embeddings must carry the same kernel. The double sum runs in a
/// fixed row-major order, so results are deterministic.
pub fn inner_product(a: &WeightedEmbedding, b: &WeightedEmbedding) -> Result<f64> {
    if a.kernel != b.kernel {
        return Err(Error::KernelMismatch);
    }
    if a.points[0].len() != b.points[0].len() {
        return Err(Error::DimensionMismatch(a.points[0].len(), b.points[0].len()));
    }
    let mut acc = 0.0;
    for (pa, &wa) in a.points.iter().zip(&a.weights) {
        let mut row = 0.0;
        for (pb, &wb) in b.points.iter().zip(&b.weights) {
            row += wb * a.kernel.eval_unchecked(pa, pb);
        }
        acc += wa * row;
    }
    Ok(acc)
}

/// Squared RKHS distance `<A,A> - 2<A,B> + <B,B>`, clamped at zero.
///
/// The distance is a squared norm analytically; floating point can dip
/// below zero, in which case the value is clamped and the event logged.
pub fn squared_mmd_biased(a: &WeightedEmbedding, b: &WeightedEmbedding) -> Result<f64> {
    let value = inner_product(a, a)? - 2.0 * inner_product(a, b)? + inner_product(b, b)?;
    if value < 0.0 {
        log::debug!("clamping negative squared MMD {value:.3e} to 0");
        return Ok(0.0);
    }
    Ok(value)
}

/// Unbiased squared-MMD U-statistic; may be negative.
///
/// Within-sample sums exclude the diagonal with `1/(n(n-1))`
/// normalization; the cross term is `2/(nm)` over all pairs.
pub fn squared_mmd_unbiased(
    sample_a: &[Vec<f64>],
    sample_b: &[Vec<f64>],
    spec: &KernelSpec,
) -> Result<f64> {
    spec.validate()?;
    let n = sample_a.len();
    let m = sample_b.len();
    if n < 2 || m < 2 {
        return Err(Error::Degenerate(
            "unbiased MMD needs at least 2 points per sample".into(),
        ));
    }
    let mut within_a = 0.0;
    for (i, a_i) in sample_a.iter().enumerate() {
        for (j, a_j) in sample_a.iter().enumerate() {
            if i != j {
                within_a += spec.eval_unchecked(a_i, a_j);
            }
        }
    }
    let mut within_b = 0.0;
    for (i, b_i) in sample_b.iter().enumerate() {
        for (j, b_j) in sample_b.iter().enumerate() {
            if i != j {
                within_b += spec.eval_unchecked(b_i, b_j);
            }
        }
    }
    let mut cross = 0.0;
    for a_i in sample_a {
        for b_j in sample_b {
            cross += spec.eval_unchecked(a_i, b_j);
        }
    }
    Ok(within_a / (n * (n - 1)) as f64 - 2.0 * cross / (n * m) as f64
        + within_b / (m * (m - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{column, rng};
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn empirical_weights_are_uniform() {
        let e = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[1.0])).unwrap();
        assert_eq!(e.weights(), &[1.0]);
        let e = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(e.weights(), &[1.0 / 3.0; 3]);
        let e =
            WeightedEmbedding::empirical(KernelSpec::Linear, &column(&(0..10).map(f64::from).collect::<Vec<_>>()))
                .unwrap();
        assert!(e.weights().iter().all(|&w| w == 1.0 / 10.0));
        assert_abs_diff_eq!(e.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn empirical_rejects_empty_sample() {
        assert!(WeightedEmbedding::empirical(KernelSpec::Linear, &[]).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = KernelSpec::gaussian(1.0);
        let single = WeightedEmbedding::empirical(g.clone(), &column(&[0.3])).unwrap();
        assert_abs_diff_eq!(inner_product(&single, &single).unwrap(), 1.0, epsilon = 1e-15);

        let a = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[0.0])).unwrap();
        let b = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[2.0])).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), 0.0);

        let a = WeightedEmbedding::empirical(g.clone(), &column(&[0.0, 2.0])).unwrap();
        let b = WeightedEmbedding::empirical(g, &column(&[0.0])).unwrap();
        let expected = (1.0 + (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(inner_product(&a, &b).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn inner_product_rejects_mismatched_kernels() {
        let a = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[0.0])).unwrap();
        let b = WeightedEmbedding::empirical(KernelSpec::gaussian(1.0), &column(&[0.0])).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::KernelMismatch)));
    }

    #[test]
    fn biased_mmd_examples() {
        let g = KernelSpec::gaussian(1.0);
        let a = WeightedEmbedding::empirical(g.clone(), &column(&[0.4, -1.0, 2.0])).unwrap();
        assert_abs_diff_eq!(squared_mmd_biased(&a, &a).unwrap(), 0.0, epsilon = 1e-12);

        let la = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[0.0])).unwrap();
        let lb = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&[2.0])).unwrap();
        assert_abs_diff_eq!(squared_mmd_biased(&la, &lb).unwrap(), 4.0, epsilon = 1e-12);

        let ga = WeightedEmbedding::empirical(g.clone(), &column(&[0.0])).unwrap();
        let gb = WeightedEmbedding::empirical(g, &column(&[2.0])).unwrap();
        assert_abs_diff_eq!(
            squared_mmd_biased(&ga, &gb).unwrap(),
            2.0 - 2.0 * (-2.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn linear_kernel_mmd_is_squared_mean_difference() {
        let mut r = rng::root(2);
        let xs: Vec<f64> = (0..15).map(|_| r.gen_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..9).map(|_| r.gen_range(-3.0..3.0)).collect();
        let a = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&xs)).unwrap();
        let b = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&ys)).unwrap();
        let ma = xs.iter().sum::<f64>() / xs.len() as f64;
        let mb = ys.iter().sum::<f64>() / ys.len() as f64;
        assert_abs_diff_eq!(
            squared_mmd_biased(&a, &b).unwrap(),
            (ma - mb) * (ma - mb),
            epsilon = 1e-10
        );
    }

    #[test]
    fn unbiased_mmd_examples() {
        let g = KernelSpec::gaussian(1.0);
        // Identical two-point samples: with the cross term running over all
        // pairs, the statistic is l(a,b) - (l(a,a) + l(b,b)) / 2, which is
        // legitimately negative for a != b.
        let s = column(&[0.7, -0.2]);
        let lab = g.eval(&[0.7], &[-0.2]).unwrap();
        assert_abs_diff_eq!(
            squared_mmd_unbiased(&s, &s, &g).unwrap(),
            lab - 1.0,
            epsilon = 1e-12
        );

        let zeros = column(&[0.0, 0.0]);
        assert_abs_diff_eq!(
            squared_mmd_unbiased(&zeros, &zeros, &KernelSpec::Linear).unwrap(),
            0.0,
            epsilon = 1e-15
        );

        let a = column(&[0.0, 1.0]);
        let b = column(&[2.0, 3.0]);
        assert_abs_diff_eq!(
            squared_mmd_unbiased(&a, &b, &KernelSpec::Linear).unwrap(),
            3.5,
            epsilon = 1e-12
        );

        assert!(squared_mmd_unbiased(&column(&[1.0]), &b, &g).is_err());
    }

    /// Literal double-loop kernel-sum oracle for the biased statistic.
    fn mmd_biased_oracle(a: &WeightedEmbedding, b: &WeightedEmbedding) -> f64 {
        let k = a.kernel();
        let mut total = 0.0;
        for (pi, &wi) in a.points().iter().zip(a.weights()) {
            for (pj, &wj) in a.points().iter().zip(a.weights()) {
                total += wi * wj * k.eval(pi, pj).unwrap();
            }
        }
        for (pi, &wi) in a.points().iter().zip(a.weights()) {
            for (pj, &wj) in b.points().iter().zip(b.weights()) {
                total -= 2.0 * wi * wj * k.eval(pi, pj).unwrap();
            }
        }
        for (pi, &wi) in b.points().iter().zip(b.weights()) {
            for (pj, &wj) in b.points().iter().zip(b.weights()) {
                total += wi * wj * k.eval(pi, pj).unwrap();
            }
        }
        total.max(0.0)
    }

    #[test]
    fn biased_mmd_matches_double_loop_oracle() {
        let mut r = rng::root(17);
        for trial in 0..5 {
            let n = 3 + trial * 3;
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)])
                .collect();
            let ys: Vec<Vec<f64>> = (0..(n + 2))
                .map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)])
                .collect();
            let wa: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
            let k = KernelSpec::gaussian(0.8);
            let a = WeightedEmbedding::new(xs, wa, k.clone()).unwrap();
            let b = WeightedEmbedding::empirical(k, &ys).unwrap();
            let got = squared_mmd_biased(&a, &b).unwrap();
            let want = mmd_biased_oracle(&a, &b);
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn unbiased_mmd_centered_under_null() {
        // Mean of the U-statistic over resamples from P = Q stays within
        // three standard errors of zero.
        let spec = KernelSpec::gaussian(1.0);
        let mut r = rng::root(4);
        let reps = 1000;
        let n = 20;
        let mut values = Vec::with_capacity(reps);
        for _ in 0..reps {
            let a: Vec<Vec<f64>> =
                (0..n).map(|_| vec![StandardNormal.sample(&mut r)]).collect();
            let b: Vec<Vec<f64>> =
                (0..n).map(|_| vec![StandardNormal.sample(&mut r)]).collect();
            values.push(squared_mmd_unbiased(&a, &b, &spec).unwrap());
        }
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} exceeds 3 SE {se}");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn biased_mmd_of_an_embedding_with_itself_vanishes(
                values in prop::collection::vec(-4.0f64..4.0, 1..15),
                raw_weights in prop::collection::vec(-1.0f64..1.5, 15),
            ) {
                let weights = raw_weights[..values.len()].to_vec();
                let e = WeightedEmbedding::new(
                    column(&values),
                    weights,
                    KernelSpec::gaussian(0.8),
                )
                .unwrap();
                prop_assert!(squared_mmd_biased(&e, &e).unwrap() <= 1e-12);
            }

            #[test]
            fn linear_kernel_reduces_to_squared_mean_difference(
                xs in prop::collection::vec(-4.0f64..4.0, 2..15),
                ys in prop::collection::vec(-4.0f64..4.0, 2..15),
            ) {
                let a = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&xs)).unwrap();
                let b = WeightedEmbedding::empirical(KernelSpec::Linear, &column(&ys)).unwrap();
                let ma = xs.iter().sum::<f64>() / xs.len() as f64;
                let mb = ys.iter().sum::<f64>() / ys.len() as f64;
                let gap: f64 = squared_mmd_biased(&a, &b).unwrap();
                prop_assert!((gap - (ma - mb) * (ma - mb)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn evaluate_is_weighted_kernel_sum() {
        let k = KernelSpec::gaussian(1.0);
        let e = WeightedEmbedding::new(column(&[0.0, 2.0]), vec![0.25, 0.75], k).unwrap();
        let expected = 0.25 * (-0.5f64).exp() + 0.75 * (-0.5f64).exp();
        assert_abs_diff_eq!(e.evaluate(&[1.0]).unwrap(), expected, epsilon = 1e-12);
    }
}
