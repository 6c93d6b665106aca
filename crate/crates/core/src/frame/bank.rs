use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating the orthogonality of a loaded or
/// constructed bank.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Orthogonal patch-space filter bank `W = [A1, A2]`.
///
/// Columns are vectorized `k1 x k2` filters in the global column-major patch
/// layout. Column 0 is the fixed low-pass filter (the constant unit vector);
/// the remaining `k - 1` columns are the learned high-pass filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    k1: usize,
    k2: usize,
    w: DMatrix<f64>,
}

/// JSON layout: `{"k1": .., "k2": .., "columns": [[..], ..]}`, low-pass first.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterBankJson {
    k1: usize,
    k2: usize,
    columns: Vec<Vec<f64>>,
}

/// Orthonormal 1-D DCT-II basis vector `u` of length `n`, sampled at `x`.
pub fn dct_ii(n: usize, u: usize, x: usize) -> f64 {
    let scale = if u == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    scale * (PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64).cos()
}

/// Separable 2-D DCT-II basis of the `k1 x k2` patch space.
///
/// Basis `(u, v)` (horizontal frequency `u`, vertical frequency `v`) is column
/// `v + u * k2`, mirroring the pixel layout, so column 0 is the DC vector and
/// the last column is the finest detail.
pub fn dct_init(k1: usize, k2: usize) -> Result<FilterBank> {
    if k1 < 2 || k2 < 2 {
        return Err(Error::InvalidParameter(format!(
            "patch size must be at least 2x2, got {k1}x{k2}"
        )));
    }
    let k = k1 * k2;
    let w = DMatrix::from_fn(k, k, |row, col| {
        let (dy, dx) = (row % k2, row / k2);
        let (v, u) = (col % k2, col / k2);
        dct_ii(k1, u, dx) * dct_ii(k2, v, dy)
    });
    FilterBank::from_matrix(k1, k2, w)
}

impl FilterBank {
    /// Wraps a `k x k` matrix, checking the bank invariants.
    pub fn from_matrix(k1: usize, k2: usize, w: DMatrix<f64>) -> Result<Self> {
        let k = k1 * k2;
        if w.shape() != (k, k) {
            return Err(Error::mismatch(
                format!("{k}x{k} filter matrix"),
                format!("{}x{}", w.nrows(), w.ncols()),
            ));
        }
        let bank = Self { k1, k2, w };
        let dc = 1.0 / (k as f64).sqrt();
        if bank.w.column(0).iter().any(|&v| (v - dc).abs() > ORTHOGONALITY_TOL) {
            return Err(Error::InvalidParameter(
                "low-pass filter must be the constant unit vector".into(),
            ));
        }
        let err = bank.orthogonality_error();
        if err > ORTHOGONALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "filter bank is not orthogonal (max |W'W - I| = {err:e})"
            )));
        }
        Ok(bank)
    }

    pub(crate) fn from_matrix_unchecked(k1: usize, k2: usize, w: DMatrix<f64>) -> Self {
        Self { k1, k2, w }
    }

    #[inline]
    pub fn k1(&self) -> usize {
        self.k1
    }

    #[inline]
    pub fn k2(&self) -> usize {
        self.k2
    }

    #[inline]
    pub fn patch_dim(&self) -> usize {
        self.k1 * self.k2
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn lowpass(&self) -> nalgebra::DVectorView<'_, f64> {
        self.w.column(0)
    }

    pub fn highpass(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.w.columns(1, self.patch_dim() - 1)
    }

    /// `max |W^T W - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.w.tr_mul(&self.w);
        gram.iter()
            .enumerate()
            .map(|(i, &g)| {
                let (r, c) = (i % gram.nrows(), i / gram.nrows());
                (g - if r == c { 1.0 } else { 0.0 }).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Flips high-pass columns so the entry of largest magnitude in each is
    /// non-negative. Near-ties (within a relative 1e-9) resolve to the lowest
    /// row index. Returns which columns were flipped (index 0 is never flipped).
    pub fn canonicalize_signs(&mut self) -> Vec<bool> {
        let k = self.patch_dim();
        let mut flipped = vec![false; k];
        for j in 1..k {
            let col = self.w.column(j);
            let peak = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let lead = col
                .iter()
                .copied()
                .find(|v| v.abs() >= peak * (1.0 - 1e-9))
                .unwrap_or(0.0);
            if lead < 0.0 {
                self.w.column_mut(j).neg_mut();
                flipped[j] = true;
            }
        }
        flipped
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = FilterBankJson {
            k1: self.k1,
            k2: self.k2,
            columns: self.w.column_iter().map(|c| c.iter().copied().collect()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FilterBankJson = serde_json::from_str(text)?;
        let k = doc.k1 * doc.k2;
        if doc.columns.len() != k || doc.columns.iter().any(|c| c.len() != k) {
            return Err(Error::mismatch(
                format!("{k} columns of length {k}"),
                format!("{} columns", doc.columns.len()),
            ));
        }
        let w = DMatrix::from_fn(k, k, |r, c| doc.columns[c][r]);
        Self::from_matrix(doc.k1, doc.k2, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowpass_of_2x2() {
        let bank = dct_init(2, 2).unwrap();
        for &v in bank.lowpass().iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn dct_is_orthonormal() {
        for (k1, k2) in [(2, 2), (3, 5), (4, 4), (8, 8), (16, 16)] {
            let bank = dct_init(k1, k2).unwrap();
            assert!(bank.orthogonality_error() < 1e-12, "{k1}x{k2}");
        }
    }

    #[test]
    fn dct_4x4_matches_outer_products() {
        // Independent evaluation of the 1-D DCT-II formula.
        let n = 4usize;
        let basis = |u: usize, x: usize| -> f64 {
            let a = if u == 0 { 0.5 } else { std::f64::consts::FRAC_1_SQRT_2 };
            a * ((2.0 * x as f64 + 1.0) * u as f64 * PI / 8.0).cos()
        };
        let bank = dct_init(n, n).unwrap();
        for u in 0..n {
            for v in 0..n {
                let col = bank.matrix().column(v + u * n);
                for dx in 0..n {
                    for dy in 0..n {
                        let expect = basis(u, dx) * basis(v, dy);
                        assert!((col[dy + dx * n] - expect).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_small_patch() {
        assert!(dct_init(1, 4).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut bank = dct_init(3, 4).unwrap();
        bank.canonicalize_signs();
        let text = bank.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["k1"], 3);
        assert_eq!(v["columns"].as_array().unwrap().len(), 12);
        assert_eq!(FilterBank::from_json(&text).unwrap(), bank);
    }

    #[test]
    fn json_rejects_non_orthogonal() {
        let bank = dct_init(2, 2).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&bank.to_json().unwrap()).unwrap();
        v["columns"][1][0] = serde_json::json!(0.9);
        assert!(FilterBank::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn canonical_signs_are_idempotent() {
        let mut bank = dct_init(4, 4).unwrap();
        let first = bank.canonicalize_signs();
        assert!(!first[0]);
        let again = bank.canonicalize_signs();
        assert!(again.iter().all(|f| !f));
        assert!(bank.orthogonality_error() < 1e-12);
    }
}
