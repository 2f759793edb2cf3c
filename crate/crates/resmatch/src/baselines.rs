//! Frobenius-norm completion baselines and the fully-observed denoisers.
//!
//! The baselines minimize the plain squared data misfit under the same two
//! constraint styles as the spectral matching solvers: alternating gradient
//! descent on a rank-s factorization, and proximal soft-thresholding for the
//! nuclear-norm relaxation (the classic soft-impute recursion with unit step;
//! the mask projection is 1-Lipschitz). They share initialization, stopping
//! rule and report format with the solvers so benchmark comparisons are
//! apples to apples.
//!
//! [`denoise_all`] handles the fully observed case: from one SVD of the data
//! it produces the rank-s truncation, the singular-value soft-threshold, and
//! the RMT denoiser that inverts the spiked-model bias of each retained
//! singular value and clamps below the detection edge.

use crate::criterion::working_sigma;
use crate::decomp::{matmul, matmul_at, reconstruct_scaled, soft_threshold, svd};
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, ObservationMask};
use crate::reference::{estimate_reference, SpectralReference, DEFAULT_ELL};
use crate::solvers::{
    error_record, masked_residual, prepare_input, rel_change, IterationRecord, SolverReport,
    MAX_HALVINGS,
};

/// Hyperparameters of a baseline run; exactly one of `rank_s` / `lambda_nuc`
/// is set. `eta0 = None` selects the automatic step size (factorized path
/// only; the nuclear baseline uses the fixed unit proximal step).
#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub rank_s: Option<usize>,
    pub lambda_nuc: Option<f64>,
    pub max_iters: usize,
    pub eta0: Option<f64>,
    pub tol: f64,
}

impl BaselineConfig {
    pub fn factorized(rank_s: usize) -> Self {
        Self {
            rank_s: Some(rank_s),
            lambda_nuc: None,
            max_iters: 200,
            eta0: None,
            tol: 1e-4,
        }
    }

    pub fn nuclear(lambda: f64) -> Self {
        Self {
            rank_s: None,
            lambda_nuc: Some(lambda),
            max_iters: 200,
            eta0: None,
            tol: 1e-4,
        }
    }

    pub fn with_max_iters(mut self, k: usize) -> Self {
        self.max_iters = k;
        self
    }

    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = Some(eta0);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        match (self.rank_s, self.lambda_nuc) {
            (Some(_), Some(_)) | (None, None) => Err(Error::InvalidConfig(
                "exactly one of rank_s / lambda_nuc must be set".into(),
            )),
            (Some(0), None) => Err(Error::InvalidConfig("rank_s must be positive".into())),
            _ if self.max_iters == 0 => {
                Err(Error::InvalidConfig("max_iters must be at least 1".into()))
            }
            _ if !(self.tol > 0.0) => Err(Error::InvalidConfig("tol must be positive".into())),
            _ => Ok(()),
        }
    }
}

fn frob_sq(a: &DenseMatrix) -> f64 {
    a.data().iter().map(|v| v * v).sum()
}

/// Alternating gradient descent on `||Y - P_Omega(L R^T)||_F^2` with the same
/// split-factor initialization, line search and stopping policy as the
/// spectral matching solver.
pub fn baseline_factorized(
    y: &DenseMatrix,
    mask: &ObservationMask,
    cfg: &BaselineConfig,
    truth: Option<&DenseMatrix>,
) -> Result<SolverReport> {
    cfg.validate()?;
    let s_rank = cfg
        .rank_s
        .ok_or_else(|| Error::InvalidConfig("baseline_factorized requires rank_s".into()))?;
    let prep = prepare_input(y, mask, truth)?;
    let (m, n) = prep.y.shape();
    if s_rank > n {
        return Err(Error::RankOutOfRange {
            rank: s_rank,
            max: n,
        });
    }
    let p_hat = prep.mask.p_hat();

    let f0 = svd(&prep.y.scale(1.0 / p_hat))?;
    let mut left = DenseMatrix::from_fn(m, s_rank, |i, j| f0.u.get(i, j) * f0.s[j].sqrt());
    let mut right = DenseMatrix::from_fn(n, s_rank, |i, j| f0.v.get(i, j) * f0.s[j].sqrt());
    let mut current = crate::decomp::matmul_bt(&left, &right)?;
    let mut resid = masked_residual(&prep.y, &current, &prep.mask);
    let mut loss = frob_sq(&resid);
    // gradient curvature in each factor is of order the top singular value
    let eta0 = cfg.eta0.unwrap_or(0.25 / f0.s[0].max(1e-30));

    let mut report = SolverReport {
        estimate: current.clone(),
        iters_run: 0,
        trace: Vec::new(),
        converged: false,
        degenerate: false,
        transposed_input: prep.transposed,
    };

    'outer: for iter in 1..=cfg.max_iters {
        // gradients: d/dL = -2 P(resid) R, d/dR = -2 P(resid)^T L
        let g_left = matmul(&resid, &right)?; // m x s
        let g_right = matmul_at(&resid, &left)?; // n x s
        let mut eta = eta0;
        let mut halvings = 0;
        loop {
            let left_c = DenseMatrix::from_fn(m, s_rank, |i, j| {
                left.get(i, j) + 2.0 * eta * g_left.get(i, j)
            });
            let right_c = DenseMatrix::from_fn(n, s_rank, |i, j| {
                right.get(i, j) + 2.0 * eta * g_right.get(i, j)
            });
            let cand = crate::decomp::matmul_bt(&left_c, &right_c)?;
            let resid_c = masked_residual(&prep.y, &cand, &prep.mask);
            let loss_c = frob_sq(&resid_c);
            if loss_c <= loss {
                let change = rel_change(&cand, &current);
                left = left_c;
                right = right_c;
                current = cand;
                resid = resid_c;
                loss = loss_c;
                let errors = match &prep.truth {
                    Some(t) => Some(error_record(&current, t, prep.orig_rows)?),
                    None => None,
                };
                report.trace.push(IterationRecord {
                    iter,
                    loss,
                    sigma_hat: 0.0,
                    step: eta,
                    rel_change: change,
                    e_f: errors.map(|e| e.0),
                    e_sp: errors.map(|e| e.1),
                    e_inf: errors.map(|e| e.2),
                });
                if change < cfg.tol {
                    report.converged = true;
                    break 'outer;
                }
                break;
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                report.converged = false;
                break 'outer;
            }
            eta *= 0.5;
        }
    }

    if report.trace.len() == cfg.max_iters {
        report.converged = true;
    }
    report.iters_run = report.trace.len();
    report.estimate = current;
    if report.transposed_input {
        report.estimate = report.estimate.transpose();
    }
    Ok(report)
}

/// Soft-impute: `M <- SVT_{lambda/2}(M + P_Omega(Y - P_Omega(M)))` with unit
/// proximal step, initialized at `p_hat^-1 Y`.
pub fn baseline_nuclear(
    y: &DenseMatrix,
    mask: &ObservationMask,
    cfg: &BaselineConfig,
    truth: Option<&DenseMatrix>,
) -> Result<SolverReport> {
    cfg.validate()?;
    let lambda = cfg
        .lambda_nuc
        .ok_or_else(|| Error::InvalidConfig("baseline_nuclear requires lambda_nuc".into()))?;
    let prep = prepare_input(y, mask, truth)?;
    let (m, n) = prep.y.shape();
    let p_hat = prep.mask.p_hat();

    let mut current = prep.y.scale(1.0 / p_hat);
    let mut report = SolverReport {
        estimate: current.clone(),
        iters_run: 0,
        trace: Vec::new(),
        converged: false,
        degenerate: false,
        transposed_input: prep.transposed,
    };

    for iter in 1..=cfg.max_iters {
        let resid = masked_residual(&prep.y, &current, &prep.mask);
        let stepped = DenseMatrix::from_fn(m, n, |i, j| current.get(i, j) + resid.get(i, j));
        let f = svd(&stepped)?;
        let cand = soft_threshold(&f, lambda / 2.0);
        let nuclear: f64 = f.s.iter().map(|&x| (x - lambda / 2.0).max(0.0)).sum();
        let change = rel_change(&cand, &current);
        current = cand;
        let misfit = frob_sq(&masked_residual(&prep.y, &current, &prep.mask));
        let errors = match &prep.truth {
            Some(t) => Some(error_record(&current, t, prep.orig_rows)?),
            None => None,
        };
        report.trace.push(IterationRecord {
            iter,
            loss: misfit + lambda * nuclear,
            sigma_hat: 0.0,
            step: 1.0,
            rel_change: change,
            e_f: errors.map(|e| e.0),
            e_sp: errors.map(|e| e.1),
            e_inf: errors.map(|e| e.2),
        });
        if change < cfg.tol {
            report.converged = true;
            break;
        }
    }

    if report.trace.len() == cfg.max_iters {
        report.converged = true;
    }
    report.iters_run = report.trace.len();
    report.estimate = current;
    if report.transposed_input {
        report.estimate = report.estimate.transpose();
    }
    Ok(report)
}

/// The three denoisers of the fully observed model, from one SVD of the data.
#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    /// Rank-s truncation.
    pub m_fac: DenseMatrix,
    /// Singular-value soft-threshold at `lambda/2`.
    pub m_nuc: DenseMatrix,
    /// RMT denoiser: spiked-model inversion of the top s singular values.
    pub m_rmt: DenseMatrix,
    /// Bulk noise-scale estimate used by the RMT denoiser.
    pub sigma_hat: f64,
}

/// Seed of the dense reference spectrum computed by the [`denoise_all`]
/// convenience wrapper.
pub const DENOISE_REFERENCE_SEED: u64 = 0x5eed_00d5;

/// Denoisers for fully observed data, with the dense reference spectrum
/// computed on the fly. Prefer [`denoise_all_with_reference`] in loops.
pub fn denoise_all(y: &DenseMatrix, s: usize, lambda_nuc: f64) -> Result<DenoiseOutput> {
    let (m, n) = if y.rows() >= y.cols() {
        y.shape()
    } else {
        (y.cols(), y.rows())
    };
    let reference = estimate_reference(m, n, 1.0, DEFAULT_ELL, DENOISE_REFERENCE_SEED)?;
    denoise_all_with_reference(y, s, lambda_nuc, &reference)
}

/// Denoisers for fully observed data against a precomputed dense (p = 1)
/// reference spectrum of matching shape.
pub fn denoise_all_with_reference(
    y: &DenseMatrix,
    s: usize,
    lambda_nuc: f64,
    reference: &SpectralReference,
) -> Result<DenoiseOutput> {
    y.validate_finite()?;
    let transposed = y.rows() < y.cols();
    let work = if transposed { y.transpose() } else { y.clone() };
    let (m, n) = work.shape();
    if s == 0 || s > n {
        return Err(Error::RankOutOfRange { rank: s, max: n });
    }
    if reference.m() != m || reference.n() != n {
        return Err(Error::InvalidConfig(format!(
            "reference spectrum is for {}x{}, data is {m}x{n}",
            reference.m(),
            reference.n()
        )));
    }
    let rho = n as f64 / m as f64;
    let f = svd(&work)?;
    let sigma_hat = working_sigma(&f.s, reference)?;

    let m_fac = reconstruct_scaled(&f.u, &f.s, &f.v, s);
    let m_nuc = soft_threshold(&f, lambda_nuc / 2.0);
    let recovered: Vec<f64> = (0..s)
        .map(|i| crate::reference::rmt_signal_value(f.s[i], sigma_hat, rho, m))
        .collect();
    let m_rmt = reconstruct_scaled(&f.u, &recovered, &f.v, s);

    let orient = |a: DenseMatrix| if transposed { a.transpose() } else { a };
    Ok(DenoiseOutput {
        m_fac: orient(m_fac),
        m_nuc: orient(m_nuc),
        m_rmt: orient(m_rmt),
        sigma_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::matmul_bt;

    fn low_rank(m: usize, n: usize, r: usize, scale: f64, seed: u64) -> DenseMatrix {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(seed);
        let l = DenseMatrix::from_fn(m, r, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let r_mat = DenseMatrix::from_fn(n, r, |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        matmul_bt(&l, &r_mat).unwrap().scale(scale)
    }

    #[test]
    fn baseline_factorized_recovers_exactly_observed_low_rank() {
        let y = low_rank(20, 12, 2, 3.0, 5);
        let mask = ObservationMask::full(20, 12);
        let cfg = BaselineConfig::factorized(2).with_max_iters(500).with_tol(1e-10);
        let report = baseline_factorized(&y, &mask, &cfg, None).unwrap();
        let err = report.estimate.sub(&y).unwrap().frobenius_norm() / y.frobenius_norm();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn baseline_factorized_loss_is_monotone() {
        let y = low_rank(18, 10, 3, 2.0, 8);
        let mask = ObservationMask::from_bools(
            18,
            10,
            (0..180).map(|k| k % 3 != 0).collect(),
        )
        .unwrap();
        let cfg = BaselineConfig::factorized(3).with_max_iters(50);
        let report = baseline_factorized(&y, &mask, &cfg, None).unwrap();
        for w in report.trace.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-12);
        }
    }

    #[test]
    fn baseline_nuclear_large_lambda_gives_zero() {
        let y = low_rank(14, 9, 2, 1.5, 3);
        let mask = ObservationMask::full(14, 9);
        let cfg = BaselineConfig::nuclear(1e9).with_max_iters(4);
        let report = baseline_nuclear(&y, &mask, &cfg, None).unwrap();
        assert_eq!(report.estimate.frobenius_norm(), 0.0);
    }

    #[test]
    fn baseline_nuclear_lambda_zero_full_mask_returns_data() {
        let y = low_rank(14, 9, 3, 1.5, 4);
        let mask = ObservationMask::full(14, 9);
        let cfg = BaselineConfig::nuclear(0.0).with_max_iters(5);
        let report = baseline_nuclear(&y, &mask, &cfg, None).unwrap();
        // after one step M = SVT_0(Y) = Y, a fixed point
        assert!(report.estimate.sub(&y).unwrap().max_abs() < 1e-10);
        assert!(report.converged);
    }

    #[test]
    fn denoise_all_noiseless_rank_s_recovers_input() {
        let y = low_rank(20, 12, 3, 2.0, 6);
        // tiny noise keeps the bulk nonzero so sigma_hat is defined
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(7);
        let noisy = DenseMatrix::from_fn(20, 12, |i, j| {
            y.get(i, j) + 1e-9 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let out = denoise_all(&noisy, 3, 0.0).unwrap();
        assert!(out.m_fac.sub(&y).unwrap().max_abs() < 1e-6);
        assert!(out.m_nuc.sub(&y).unwrap().max_abs() < 1e-6);
        assert!(out.m_rmt.sub(&y).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn denoise_rmt_only_shrinks() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from_seed(9);
        let signal = low_rank(40, 24, 3, 4.0, 10);
        let noisy = DenseMatrix::from_fn(40, 24, |i, j| {
            signal.get(i, j) + 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let out = denoise_all(&noisy, 3, 0.1).unwrap();
        let s_obs = crate::decomp::singular_values(&noisy).unwrap();
        let s_rmt = crate::decomp::singular_values(&out.m_rmt).unwrap();
        for i in 0..3 {
            assert!(s_rmt[i] <= s_obs[i] + 1e-9, "component {i} grew");
        }
    }
}
