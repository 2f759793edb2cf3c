//! Dense matrix container and observation masks.
//!
//! [`DenseMatrix`] is the universal numeric carrier of the crate: the target
//! matrix, noise, observations and residuals are all plain row-major `f64`
//! buffers. [`ObservationMask`] is the binary pattern of observed entries
//! together with its empirical observed fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense real matrix.
///
/// The container itself accepts any shape and any values (tests deliberately
/// plant NaN sentinels off-mask); operations that require finite input
/// validate it at their own entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "buffer of length {} does not fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Identity-like matrix with ones on the main diagonal.
    pub fn eye(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Errors with the first offending position if any entry is NaN or infinite.
    pub fn validate_finite(&self) -> Result<()> {
        for (k, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: k / self.cols,
                    col: k % self.cols,
                });
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub(crate) fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected_rows: self.rows,
                expected_cols: self.cols,
                found_rows: other.rows,
                found_cols: other.cols,
            });
        }
        Ok(())
    }
}

/// Binary observation pattern with its empirical observed fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
    count: usize,
}

impl ObservationMask {
    pub fn from_bools(rows: usize, cols: usize, observed: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || observed.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "mask buffer of length {} does not fill a {rows}x{cols} matrix",
                observed.len()
            )));
        }
        let count = observed.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(Self {
            rows,
            cols,
            observed,
            count,
        })
    }

    /// Mask observing every entry.
    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_bools(rows, cols, vec![true; rows * cols]).expect("full mask is never empty")
    }

    pub fn from_indices(rows: usize, cols: usize, indices: &[(usize, usize)]) -> Result<Self> {
        let mut observed = vec![false; rows * cols];
        for &(i, j) in indices {
            if i >= rows || j >= cols {
                return Err(Error::InvalidDimensions(format!(
                    "index ({i}, {j}) out of range for {rows}x{cols}"
                )));
            }
            observed[i * cols + j] = true;
        }
        Self::from_bools(rows, cols, observed)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    /// Empirical observed fraction, in (0, 1].
    #[inline]
    pub fn p_hat(&self) -> f64 {
        self.count as f64 / (self.rows * self.cols) as f64
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.cols + j]
    }

    #[inline]
    pub fn flags(&self) -> &[bool] {
        &self.observed
    }

    pub fn transpose(&self) -> Self {
        let mut observed = vec![false; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                observed[j * self.rows + i] = self.observed[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            observed,
            count: self.count,
        }
    }
}

/// `P_Omega`: keeps observed entries, zeroes the rest.
pub fn project_mask(a: &DenseMatrix, mask: &ObservationMask) -> Result<DenseMatrix> {
    if a.shape() != (mask.rows(), mask.cols()) {
        return Err(Error::ShapeMismatch {
            expected_rows: mask.rows(),
            expected_cols: mask.cols(),
            found_rows: a.rows(),
            found_cols: a.cols(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(mask.flags())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(DenseMatrix::from_vec(a.rows(), a.cols(), data).expect("shape preserved"))
}

/// In-place variant of [`project_mask`] for solver hot loops.
pub(crate) fn project_mask_in_place(a: &mut DenseMatrix, mask: &ObservationMask) {
    debug_assert_eq!(a.shape(), (mask.rows(), mask.cols()));
    for (v, &keep) in a.data_mut().iter_mut().zip(mask.flags()) {
        if !keep {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_mask_direct_definition() {
        let a = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mask = ObservationMask::from_indices(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let p = project_mask(&a, &mask).unwrap();
        assert_eq!(p.data(), &[1.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn project_mask_full_is_identity() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let p = project_mask(&a, &ObservationMask::full(3, 4)).unwrap();
        assert_eq!(p, a);
    }

    #[test]
    fn project_mask_zero_matrix_stays_zero() {
        let a = DenseMatrix::zeros(3, 3);
        let mask = ObservationMask::from_indices(3, 3, &[(0, 0)]).unwrap();
        let p = project_mask(&a, &mask).unwrap();
        assert_eq!(p.frobenius_norm(), 0.0);
    }

    #[test]
    fn project_mask_shape_mismatch_errors() {
        let a = DenseMatrix::zeros(2, 3);
        let mask = ObservationMask::full(3, 2);
        assert!(project_mask(&a, &mask).is_err());
    }

    #[test]
    fn mask_counts_and_p_hat() {
        let mask = ObservationMask::from_indices(2, 5, &[(0, 0), (1, 4), (0, 3)]).unwrap();
        assert_eq!(mask.count(), 3);
        assert!((mask.p_hat() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(matches!(
            ObservationMask::from_bools(2, 2, vec![false; 4]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn validate_finite_reports_position() {
        let mut a = DenseMatrix::zeros(2, 3);
        a.set(1, 2, f64::NAN);
        match a.validate_finite() {
            Err(Error::NonFinite { row: 1, col: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
