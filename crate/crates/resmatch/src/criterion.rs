//! The residual spectral matching criterion.
//!
//! A candidate completion `M` is scored by how closely the ordered singular
//! values of its residual `Y - P_Omega(M)` match the expected spectrum of the
//! sparse Gaussian ensemble after a variance adjustment: the working noise
//! scale `sigma_hat` is the ratio of bulk singular-value sums between the
//! residual and the reference, and the loss is the observed-fraction-weighted
//! L2 distance between the normalized residual spectrum and the reference.
//! Both the scale estimate and the loss depend on the residual only through
//! its singular values, which makes the criterion scale and orthogonally
//! invariant.

use serde::{Deserialize, Serialize};

use crate::decomp::singular_values;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::reference::{bulk_range, SpectralReference};

/// Nonnegative weights over spectrum indices summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidConfig("weight vector is empty".into()));
        }
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "weights must sum to 1 (got {sum})"
            )));
        }
        Ok(Self { w })
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Default weights: half the mass uniformly on the leading `K = min(4 s, n)`
/// indices, the other half uniformly on the rest (all uniform when `K = n`).
/// Keeps the leading weights comfortably above `log^-2 m` at desk scale.
pub fn default_weights(n: usize, s_rank: usize) -> Result<WeightVector> {
    if s_rank == 0 || s_rank > n {
        return Err(Error::RankOutOfRange {
            rank: s_rank,
            max: n,
        });
    }
    let k = (4 * s_rank).min(n);
    let w = if k == n {
        vec![1.0 / n as f64; n]
    } else {
        let head = 0.5 / k as f64;
        let tail = 0.5 / (n - k) as f64;
        (0..n)
            .map(|i| if i < k { head } else { tail })
            .collect::<Vec<_>>()
    };
    // exact normalization guard against accumulated rounding
    let sum: f64 = w.iter().sum();
    WeightVector::new(w.into_iter().map(|x| x / sum).collect())
}

/// Uniform weights `1/n`.
pub fn uniform_weights(n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidConfig("weight vector is empty".into()));
    }
    let w = vec![1.0 / n as f64; n];
    let sum: f64 = w.iter().sum();
    WeightVector::new(w.into_iter().map(|x| x / sum).collect())
}

/// Working noise-scale estimate: the ratio of the residual's bulk
/// singular-value sum to `sqrt(m)` times the reference bulk sum.
///
/// Errors with [`Error::DegenerateResidual`] when the residual bulk is all
/// zero, which signals that the candidate interpolates the observations
/// exactly (overfit past the noise floor) rather than a zero loss.
pub fn working_sigma(residual_singulars: &[f64], reference: &SpectralReference) -> Result<f64> {
    let n = reference.n();
    if residual_singulars.len() != n {
        return Err(Error::InvalidDimensions(format!(
            "expected {n} residual singular values, got {}",
            residual_singulars.len()
        )));
    }
    let bulk: f64 = bulk_range(n).map(|i| residual_singulars[i]).sum();
    if !(bulk > 0.0) {
        return Err(Error::DegenerateResidual);
    }
    Ok(bulk / ((reference.m() as f64).sqrt() * reference.bulk_sum()))
}

/// Decomposition of one loss evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Value of the full criterion `p_hat^-1 * sum_i w_i (s_i/(sqrt(m) sigma_hat) - lambda_hat_i)^2`.
    pub loss: f64,
    /// Working noise-scale estimate used in the normalization.
    pub sigma_hat: f64,
    /// Ordered singular values of the residual.
    pub residual_singulars: Vec<f64>,
    /// Per-index terms `w_i (s_i - sigma_hat lambda_hat_i sqrt(m))^2` before
    /// the `p_hat^-1 / (m sigma_hat^2)` factor.
    pub per_index: Vec<f64>,
}

/// Spectral matching loss of a residual matrix.
pub fn spectral_loss(
    residual: &DenseMatrix,
    reference: &SpectralReference,
    weights: &WeightVector,
    p_hat: f64,
) -> Result<LossBreakdown> {
    if residual.shape() != (reference.m(), reference.n()) {
        return Err(Error::ShapeMismatch {
            expected_rows: reference.m(),
            expected_cols: reference.n(),
            found_rows: residual.rows(),
            found_cols: residual.cols(),
        });
    }
    let s = singular_values(residual)?;
    spectral_loss_from_singulars(&s, reference, weights, p_hat)
}

/// Loss from precomputed residual singular values; the cheap path used by
/// solver line searches.
pub fn spectral_loss_from_singulars(
    residual_singulars: &[f64],
    reference: &SpectralReference,
    weights: &WeightVector,
    p_hat: f64,
) -> Result<LossBreakdown> {
    let sigma_hat = working_sigma(residual_singulars, reference)?;
    spectral_loss_with_sigma(residual_singulars, sigma_hat, reference, weights, p_hat)
}

/// Loss with an explicitly supplied (frozen) noise scale. Used by solvers
/// that evaluate the criterion at a scale other than the current bulk
/// estimate, and by gradient checks that hold the scale constant.
pub fn spectral_loss_with_sigma(
    residual_singulars: &[f64],
    sigma_hat: f64,
    reference: &SpectralReference,
    weights: &WeightVector,
    p_hat: f64,
) -> Result<LossBreakdown> {
    if !(p_hat > 0.0 && p_hat <= 1.0) {
        return Err(Error::InvalidProbability(p_hat));
    }
    if !(sigma_hat > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sigma_hat must be positive, got {sigma_hat}"
        )));
    }
    if weights.len() != reference.n() || residual_singulars.len() != reference.n() {
        return Err(Error::InvalidDimensions(format!(
            "weights ({}), spectrum ({}) and reference ({}) lengths must agree",
            weights.len(),
            residual_singulars.len(),
            reference.n()
        )));
    }
    let sqrt_m = (reference.m() as f64).sqrt();
    let lambda = reference.lambda_hat();
    let mut loss = 0.0;
    let mut per_index = Vec::with_capacity(residual_singulars.len());
    for i in 0..residual_singulars.len() {
        let w = weights.values()[i];
        let dev = residual_singulars[i] - sigma_hat * lambda[i] * sqrt_m;
        per_index.push(w * dev * dev);
        let norm_dev = residual_singulars[i] / (sqrt_m * sigma_hat) - lambda[i];
        loss += w * norm_dev * norm_dev;
    }
    loss /= p_hat;
    Ok(LossBreakdown {
        loss,
        sigma_hat,
        residual_singulars: residual_singulars.to_vec(),
        per_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{matmul_bt, svd};
    use crate::reference::estimate_reference;

    #[test]
    fn default_weights_collapse_when_k_equals_n() {
        let w = default_weights(4, 1).unwrap();
        for &x in w.values() {
            assert!((x - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn default_weights_split_head_tail() {
        let w = default_weights(12, 1).unwrap();
        for i in 0..4 {
            assert!((w.values()[i] - 0.125).abs() < 1e-15);
        }
        for i in 4..12 {
            assert!((w.values()[i] - 0.0625).abs() < 1e-15);
        }
    }

    #[test]
    fn weights_always_sum_to_one() {
        for (n, s) in [(5, 1), (17, 3), (250, 5), (100, 30), (9, 9)] {
            let w = default_weights(n, s).unwrap();
            let sum: f64 = w.values().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "n={n} s={s} sum={sum}");
        }
    }

    #[test]
    fn working_sigma_fixed_point() {
        let reference = estimate_reference(30, 18, 0.6, 4, 5).unwrap();
        let sigma = 1.7;
        let sqrt_m = (30f64).sqrt();
        let scaled: Vec<f64> = reference
            .lambda_hat()
            .iter()
            .map(|&l| sqrt_m * sigma * l)
            .collect();
        let est = working_sigma(&scaled, &reference).unwrap();
        assert!((est - sigma).abs() < 1e-12);
    }

    #[test]
    fn working_sigma_is_one_homogeneous() {
        let reference = estimate_reference(30, 18, 0.6, 4, 5).unwrap();
        let s: Vec<f64> = (0..18).map(|i| 2.0 / (1.0 + i as f64)).collect();
        let a = working_sigma(&s, &reference).unwrap();
        let doubled: Vec<f64> = s.iter().map(|x| 2.0 * x).collect();
        let b = working_sigma(&doubled, &reference).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-14);
    }

    #[test]
    fn working_sigma_degenerate_bulk_errors() {
        let reference = estimate_reference(30, 18, 0.6, 4, 5).unwrap();
        let mut s = vec![0.0; 18];
        s[0] = 5.0; // top value only; bulk indices are all zero
        assert!(matches!(
            working_sigma(&s, &reference),
            Err(Error::DegenerateResidual)
        ));
    }

    #[test]
    fn loss_zero_at_exact_spectrum_match() {
        let reference = estimate_reference(24, 12, 0.5, 3, 9).unwrap();
        let w = default_weights(12, 2).unwrap();
        // residual with spectrum exactly sqrt(m) sigma0 lambda_hat via random
        // orthonormal factors
        let g = crate::reference::sample_sparse_gaussian(24, 12, 1.0, 77).unwrap();
        let f = svd(&g).unwrap();
        let sigma0 = 0.9;
        let scaled: Vec<f64> = reference
            .lambda_hat()
            .iter()
            .map(|&l| (24f64).sqrt() * sigma0 * l)
            .collect();
        let residual = crate::decomp::reconstruct_scaled(&f.u, &scaled, &f.v, 12);
        let breakdown = spectral_loss(&residual, &reference, &w, 0.5).unwrap();
        assert!(breakdown.loss < 1e-18, "loss={}", breakdown.loss);
        assert!((breakdown.sigma_hat - sigma0).abs() < 1e-10);
    }

    #[test]
    fn loss_breakdown_consistency() {
        let reference = estimate_reference(20, 10, 0.8, 3, 4).unwrap();
        let w = default_weights(10, 2).unwrap();
        let residual = crate::reference::sample_sparse_gaussian(20, 10, 0.8, 13).unwrap();
        let b = spectral_loss(&residual, &reference, &w, 0.8).unwrap();
        let m = 20f64;
        let recomposed: f64 =
            b.per_index.iter().sum::<f64>() / (m * b.sigma_hat * b.sigma_hat) / 0.8;
        assert!(
            (b.loss - recomposed).abs() <= 1e-10 * b.loss.max(1.0),
            "{} vs {recomposed}",
            b.loss
        );
    }

    #[test]
    fn loss_scale_invariance_exact() {
        let reference = estimate_reference(20, 10, 0.8, 3, 4).unwrap();
        let w = default_weights(10, 2).unwrap();
        let residual = crate::reference::sample_sparse_gaussian(20, 10, 0.8, 21).unwrap();
        let a = spectral_loss(&residual, &reference, &w, 0.8).unwrap();
        let b = spectral_loss(&residual.scale(2.0), &reference, &w, 0.8).unwrap();
        // sigma_hat is 1-homogeneous so the normalized spectrum is unchanged
        assert!((a.loss - b.loss).abs() <= 1e-12 * a.loss.max(1e-30));
        assert!((b.sigma_hat - 2.0 * a.sigma_hat).abs() < 1e-12 * a.sigma_hat);
    }

    #[test]
    fn loss_orthogonal_invariance() {
        use rand::Rng;
        let reference = estimate_reference(16, 8, 1.0, 3, 4).unwrap();
        let w = default_weights(8, 2).unwrap();
        let residual = crate::reference::sample_sparse_gaussian(16, 8, 1.0, 31).unwrap();
        // random orthogonal factors from the SVD of Gaussian matrices
        let mut rng = crate::seeding::rng_from_seed(8);
        let g1 = DenseMatrix::from_fn(16, 16, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let g2 = DenseMatrix::from_fn(8, 8, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let q1 = svd(&g1).unwrap().u;
        let q2 = svd(&g2).unwrap().u;
        let rotated = matmul_bt(&crate::decomp::matmul(&q1, &residual).unwrap(), &q2).unwrap();
        let a = spectral_loss(&residual, &reference, &w, 1.0).unwrap();
        let b = spectral_loss(&rotated, &reference, &w, 1.0).unwrap();
        assert!(
            (a.loss - b.loss).abs() <= 1e-9 * (1.0 + a.loss),
            "{} vs {}",
            a.loss,
            b.loss
        );
    }
}
