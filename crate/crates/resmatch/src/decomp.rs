//! Thin SVD with a deterministic sign convention, rank projection, matrix
//! norms and incoherence diagnostics.
//!
//! Every loss, gradient, projection and shrinkage step in the crate goes
//! through [`svd`], so its contract is pinned tightly: descending singular
//! values, column-orthonormal factors, and in each column of `U` the entry of
//! largest magnitude is made nonnegative (with `V` flipped to match) so that
//! repeated runs and golden files agree bit for bit.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Thin SVD factors `A = U diag(s) V^T` with `s` nonincreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    /// `U diag(s) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        reconstruct_scaled(&self.u, &self.s, &self.v, self.s.len())
    }

    /// Rank of the factorization counted as singular values above `tol`.
    pub fn numerical_rank(&self, tol: f64) -> usize {
        self.s.iter().filter(|&&x| x > tol).count()
    }
}

pub(crate) fn to_faer(a: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
}

pub(crate) fn from_faer(a: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// `A * B` through faer's gemm.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::InvalidDimensions(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let prod = to_faer(a) * to_faer(b);
    Ok(from_faer(prod.as_ref()))
}

/// `A * B^T`.
pub fn matmul_bt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::InvalidDimensions(format!(
            "cannot multiply {}x{} by transpose of {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let prod = to_faer(a) * to_faer(b).transpose();
    Ok(from_faer(prod.as_ref()))
}

/// `A^T * B`.
pub fn matmul_at(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::InvalidDimensions(format!(
            "cannot multiply transpose of {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let prod = to_faer(a).transpose() * to_faer(b);
    Ok(from_faer(prod.as_ref()))
}

/// Full thin SVD with `k = min(m, n)` and the deterministic sign convention.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactors> {
    a.validate_finite()?;
    let fa = to_faer(a);
    let decomp = fa.thin_svd().map_err(|_| Error::SvdFailure {
        rows: a.rows(),
        cols: a.cols(),
    })?;
    let k = a.rows().min(a.cols());
    let mut u = from_faer(decomp.U());
    let mut v = from_faer(decomp.V());
    let s: Vec<f64> = (0..k).map(|i| decomp.S()[i]).collect();

    // Sign convention: in each column of U the component of largest magnitude
    // is made nonnegative; V is flipped with it so the product is unchanged.
    for col in 0..k {
        let mut best = 0.0f64;
        let mut best_val = 0.0f64;
        for i in 0..u.rows() {
            let x = u.get(i, col);
            if x.abs() > best {
                best = x.abs();
                best_val = x;
            }
        }
        if best_val < 0.0 {
            for i in 0..u.rows() {
                u.set(i, col, -u.get(i, col));
            }
            for i in 0..v.rows() {
                v.set(i, col, -v.get(i, col));
            }
        }
    }

    Ok(SvdFactors { u, s, v })
}

/// Singular values only, descending. Cheaper than [`svd`] when the vectors
/// are not needed (line searches, spectrum dumps).
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    a.validate_finite()?;
    to_faer(a).singular_values().map_err(|_| Error::SvdFailure {
        rows: a.rows(),
        cols: a.cols(),
    })
}

/// Eigenvalues of a symmetric matrix, ascending. Used by tests as an
/// independent oracle for singular values via `A^T A`.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    a.validate_finite()?;
    to_faer(a)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|_| Error::SvdFailure {
            rows: a.rows(),
            cols: a.cols(),
        })
}

/// `U[:, ..k] diag(s[..k]) V[:, ..k]^T` (coefficients may be negative).
pub fn reconstruct_scaled(
    u: &DenseMatrix,
    s: &[f64],
    v: &DenseMatrix,
    k: usize,
) -> DenseMatrix {
    let m = u.rows();
    let n = v.rows();
    let us = Mat::from_fn(m, k, |i, j| u.get(i, j) * s[j]);
    let vk = Mat::from_fn(n, k, |i, j| v.get(i, j));
    let prod = us * vk.transpose();
    from_faer(prod.as_ref())
}

/// Best rank-`s_rank` approximation in Frobenius norm (truncated SVD).
pub fn project_rank(a: &DenseMatrix, s_rank: usize) -> Result<DenseMatrix> {
    let k = a.rows().min(a.cols());
    if s_rank == 0 || s_rank > k {
        return Err(Error::RankOutOfRange {
            rank: s_rank,
            max: k,
        });
    }
    let f = svd(a)?;
    Ok(reconstruct_scaled(&f.u, &f.s, &f.v, s_rank))
}

/// The five norms of the completion model in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub max_abs: f64,
    pub two_inf: f64,
    pub nuclear: f64,
}

/// Frobenius, spectral, max-abs, row-wise 2-infinity and nuclear norms.
pub fn norms(a: &DenseMatrix) -> Result<MatrixNorms> {
    a.validate_finite()?;
    let s = singular_values(a)?;
    let two_inf = (0..a.rows())
        .map(|i| a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    Ok(MatrixNorms {
        frobenius: a.frobenius_norm(),
        spectral: s.first().copied().unwrap_or(0.0),
        max_abs: a.max_abs(),
        two_inf,
        nuclear: s.iter().sum(),
    })
}

/// Incoherence and conditioning diagnostics of the leading rank-`r` subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub mu_row: f64,
    pub mu_col: f64,
    pub mu: f64,
    pub kappa: f64,
}

/// Relative threshold below which the r-th singular value is treated as zero.
pub const RANK_DEFICIENCY_TOL: f64 = 1e-12;

/// Incoherence coefficients `mu_row = (m/r) max_i ||U_{i,1..r}||^2` (and the
/// column analogue) plus the condition number `sigma_1 / sigma_r`.
pub fn incoherence(a: &DenseMatrix, r: usize) -> Result<IncoherenceReport> {
    let k = a.rows().min(a.cols());
    if r == 0 || r > k {
        return Err(Error::RankOutOfRange { rank: r, max: k });
    }
    let f = svd(a)?;
    let sigma_1 = f.s[0];
    let sigma_r = f.s[r - 1];
    if sigma_r <= RANK_DEFICIENCY_TOL * sigma_1 || sigma_1 == 0.0 {
        return Err(Error::DegenerateRank { sigma_1, sigma_r });
    }
    let max_row_sq = |mat: &DenseMatrix| -> f64 {
        (0..mat.rows())
            .map(|i| (0..r).map(|j| mat.get(i, j).powi(2)).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    let mu_row = a.rows() as f64 / r as f64 * max_row_sq(&f.u);
    let mu_col = a.cols() as f64 / r as f64 * max_row_sq(&f.v);
    Ok(IncoherenceReport {
        mu_row,
        mu_col,
        mu: mu_row.max(mu_col),
        kappa: sigma_1 / sigma_r,
    })
}

/// Soft singular-value thresholding `SVT_t(A)`: shrink every singular value
/// by `t` and clamp at zero. The proximal map of `t * nuclear norm`.
pub fn soft_threshold(f: &SvdFactors, t: f64) -> DenseMatrix {
    let shrunk: Vec<f64> = f.s.iter().map(|&x| (x - t).max(0.0)).collect();
    let k = shrunk.iter().filter(|&&x| x > 0.0).count().max(1);
    reconstruct_scaled(&f.u, &shrunk, &f.v, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
    }

    fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn svd_identity() {
        let f = svd(&DenseMatrix::eye(3)).unwrap();
        for &s in &f.s {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_diagonal_case() {
        let a = DenseMatrix::diag(&[3.0, 2.0, 1.0]);
        let f = svd(&a).unwrap();
        assert!((f.s[0] - 3.0).abs() < 1e-12);
        assert!((f.s[1] - 2.0).abs() < 1e-12);
        assert!((f.s[2] - 1.0).abs() < 1e-12);
        // signed permutation factors reconstruct the diagonal
        assert!(max_abs_diff(&f.reconstruct(), &a) < 1e-12);
    }

    #[test]
    fn svd_matches_eigenvalue_oracle() {
        let a = rand_matrix(8, 5, 11);
        let f = svd(&a).unwrap();
        let ata = matmul_at(&a, &a).unwrap();
        let mut eig = symmetric_eigenvalues(&ata).unwrap();
        eig.reverse();
        for i in 0..5 {
            let oracle = eig[i].max(0.0).sqrt();
            assert!(
                (f.s[i] - oracle).abs() <= 1e-10,
                "i={i}: {} vs oracle {}",
                f.s[i],
                oracle
            );
        }
    }

    #[test]
    fn svd_factors_orthonormal_and_reconstruct() {
        let a = rand_matrix(20, 12, 3);
        let f = svd(&a).unwrap();
        let utu = matmul_at(&f.u, &f.u).unwrap();
        let vtv = matmul_at(&f.v, &f.v).unwrap();
        let eye = DenseMatrix::eye(12);
        assert!(max_abs_diff(&utu, &eye) <= 1e-10);
        assert!(max_abs_diff(&vtv, &eye) <= 1e-10);
        let rec_err = f.reconstruct().sub(&a).unwrap().frobenius_norm();
        assert!(rec_err <= 1e-8 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn svd_sign_convention_is_deterministic() {
        let a = rand_matrix(9, 6, 5);
        let f = svd(&a).unwrap();
        for col in 0..6 {
            let (mut best, mut val) = (0.0f64, 0.0f64);
            for i in 0..9 {
                if f.u.get(i, col).abs() > best {
                    best = f.u.get(i, col).abs();
                    val = f.u.get(i, col);
                }
            }
            assert!(val >= 0.0, "column {col} violates the sign convention");
        }
        let g = svd(&a).unwrap();
        assert_eq!(f.u, g.u);
        assert_eq!(f.v, g.v);
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a.set(0, 1, f64::INFINITY);
        assert!(svd(&a).is_err());
    }

    #[test]
    fn tied_singular_values_are_harmless() {
        let a = DenseMatrix::diag(&[2.0, 2.0, 1.0]);
        let f = svd(&a).unwrap();
        assert!((f.s[0] - 2.0).abs() < 1e-12 && (f.s[1] - 2.0).abs() < 1e-12);
        assert!(max_abs_diff(&f.reconstruct(), &a) < 1e-12);
    }

    #[test]
    fn project_rank_keeps_rank_one_input() {
        let u = rand_matrix(10, 1, 7);
        let v = rand_matrix(6, 1, 8);
        let a = matmul_bt(&u, &v).unwrap();
        let p = project_rank(&a, 1).unwrap();
        assert!(max_abs_diff(&p, &a) < 1e-10);
    }

    #[test]
    fn project_rank_truncates_diagonal() {
        let a = DenseMatrix::diag(&[3.0, 2.0, 1.0]);
        let p = project_rank(&a, 2).unwrap();
        assert!(max_abs_diff(&p, &DenseMatrix::diag(&[3.0, 2.0, 0.0])) < 1e-12);
    }

    #[test]
    fn project_rank_recovers_exact_low_rank() {
        let l = rand_matrix(10, 3, 21);
        let r = rand_matrix(6, 3, 22);
        let a = matmul_bt(&l, &r).unwrap();
        let p = project_rank(&a, 3).unwrap();
        assert!(p.sub(&a).unwrap().frobenius_norm() <= 1e-9);
    }

    #[test]
    fn project_rank_range_checks() {
        let a = DenseMatrix::zeros(4, 3);
        assert!(project_rank(&a, 0).is_err());
        assert!(project_rank(&a, 4).is_err());
    }

    #[test]
    fn norms_zero_matrix() {
        let n = norms(&DenseMatrix::zeros(3, 4)).unwrap();
        assert_eq!(n.frobenius, 0.0);
        assert_eq!(n.spectral, 0.0);
        assert_eq!(n.nuclear, 0.0);
        assert_eq!(n.max_abs, 0.0);
        assert_eq!(n.two_inf, 0.0);
    }

    #[test]
    fn norms_hand_computed_diagonal() {
        let a = DenseMatrix::diag(&[3.0, 4.0]);
        let n = norms(&a).unwrap();
        assert!((n.frobenius - 5.0).abs() < 1e-12);
        assert!((n.spectral - 4.0).abs() < 1e-12);
        assert!((n.nuclear - 7.0).abs() < 1e-12);
        assert!((n.max_abs - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_matches_svd_sum() {
        let a = rand_matrix(6, 4, 9);
        let n = norms(&a).unwrap();
        let f = svd(&a).unwrap();
        assert!((n.nuclear - f.s.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn incoherence_identity() {
        let rep = incoherence(&DenseMatrix::eye(5), 5).unwrap();
        assert!((rep.mu - 1.0).abs() < 1e-10);
        assert!((rep.kappa - 1.0).abs() < 1e-10);
    }

    #[test]
    fn incoherence_spike_is_maximally_coherent() {
        // e1 e1^T in R^{4x4}: all mass in one row/column.
        let mut a = DenseMatrix::zeros(4, 4);
        a.set(0, 0, 1.0);
        // rank-1 request on a rank-1 matrix
        let rep = incoherence(&a, 1).unwrap();
        assert!((rep.mu - 4.0).abs() < 1e-10);
    }

    #[test]
    fn incoherence_rejects_rank_deficient() {
        let a = DenseMatrix::diag(&[1.0, 1e-15, 0.0]);
        assert!(matches!(
            incoherence(&a, 2),
            Err(Error::DegenerateRank { .. })
        ));
    }

    #[test]
    fn soft_threshold_shrinks() {
        let a = DenseMatrix::diag(&[3.0, 2.0, 0.5]);
        let t = soft_threshold(&svd(&a).unwrap(), 1.0);
        assert!(max_abs_diff(&t, &DenseMatrix::diag(&[2.0, 1.0, 0.0])) < 1e-12);
    }
}
