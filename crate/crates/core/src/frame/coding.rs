//! Analysis, synthesis, hard thresholding and the sparse-approximation
//! objective for an orthogonal patch-space filter bank.

use nalgebra::DMatrix;

use super::bank::FilterBank;
use crate::error::{Error, Result};
use crate::patches::PatchMatrix;

/// Frame coefficients: one row per filter (row 0 is the low-pass band), one
/// column per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(pub DMatrix<f64>);

impl CoefficientMatrix {
    #[inline]
    pub fn bands(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn data(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Number of nonzero entries, optionally ignoring the low-pass band.
    pub fn nonzeros(&self, skip_lowpass: bool) -> usize {
        let first = usize::from(skip_lowpass);
        self.0
            .column_iter()
            .map(|c| c.iter().skip(first).filter(|&&v| v != 0.0).count())
            .sum()
    }
}

fn check_dim(bank: &FilterBank, rows: usize, what: &str) -> Result<()> {
    if bank.patch_dim() != rows {
        return Err(Error::mismatch(
            format!("{} rows", bank.patch_dim()),
            format!("{rows} rows in {what}"),
        ));
    }
    Ok(())
}

/// `W^T X`.
pub fn analyze(bank: &FilterBank, patches: &PatchMatrix) -> Result<CoefficientMatrix> {
    analyze_matrix(bank, patches.data())
}

pub fn analyze_matrix(bank: &FilterBank, x: &DMatrix<f64>) -> Result<CoefficientMatrix> {
    check_dim(bank, x.nrows(), "patch matrix")?;
    // explicit transpose: the blocked gemm path is much faster than tr_mul
    Ok(CoefficientMatrix(bank.matrix().transpose() * x))
}

/// `W alpha`.
pub fn synthesize(bank: &FilterBank, coeffs: &CoefficientMatrix) -> Result<DMatrix<f64>> {
    check_dim(bank, coeffs.bands(), "coefficient matrix")?;
    Ok(bank.matrix() * &coeffs.0)
}

/// Keeps entries with `|c| > threshold` and zeroes the rest; with
/// `protect_lowpass`, band 0 passes through untouched.
pub fn hard_threshold(coeffs: &CoefficientMatrix, threshold: f64, protect_lowpass: bool) -> CoefficientMatrix {
    let mut out = coeffs.clone();
    hard_threshold_in_place(&mut out, threshold, protect_lowpass);
    out
}

pub fn hard_threshold_in_place(coeffs: &mut CoefficientMatrix, threshold: f64, protect_lowpass: bool) {
    let first = usize::from(protect_lowpass);
    for mut col in coeffs.0.column_iter_mut() {
        for v in col.iter_mut().skip(first) {
            if v.abs() <= threshold {
                *v = 0.0;
            }
        }
    }
}

/// `||X - W alpha||_F^2 + threshold^2 * nnz(alpha)`, where the count skips the
/// low-pass band when it is protected from thresholding.
pub fn objective(
    patches: &DMatrix<f64>,
    bank: &FilterBank,
    coeffs: &CoefficientMatrix,
    threshold: f64,
    protect_lowpass: bool,
) -> Result<f64> {
    check_dim(bank, patches.nrows(), "patch matrix")?;
    if coeffs.ncols() != patches.ncols() {
        return Err(Error::mismatch(
            format!("{} coefficient columns", patches.ncols()),
            coeffs.ncols(),
        ));
    }
    let mut residual = synthesize(bank, coeffs)?;
    residual -= patches;
    let fit = residual.norm_squared();
    Ok(fit + threshold * threshold * coeffs.nonzeros(protect_lowpass) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::bank::dct_init;
    use crate::image::Image;
    use crate::patches::extract_patches;

    fn coeffs(v: &[f64]) -> CoefficientMatrix {
        CoefficientMatrix(DMatrix::from_column_slice(v.len(), 1, v))
    }

    #[test]
    fn threshold_zero_is_identity() {
        let c = coeffs(&[0.5, -0.0001, 3.0, -2.0]);
        assert_eq!(hard_threshold(&c, 0.0, false), c);
    }

    #[test]
    fn threshold_boundary_is_zeroed() {
        let c = coeffs(&[3.0, 1.0, -5.0, 2.0]);
        let t = hard_threshold(&c, 2.0, false);
        assert_eq!(t.0.as_slice(), &[3.0, 0.0, -5.0, 0.0]);
        let p = hard_threshold(&coeffs(&[1.0, 1.0, -5.0, 2.0]), 2.0, true);
        assert_eq!(p.0.as_slice(), &[1.0, 0.0, -5.0, 0.0]);
    }

    #[test]
    fn constant_patches_have_only_lowpass() {
        let img = Image::filled(6, 6, 10.0).unwrap();
        let x = extract_patches(&[img], 3, 3, 1).unwrap();
        let c = analyze(&dct_init(3, 3).unwrap(), &x).unwrap();
        for col in c.0.column_iter() {
            assert!((col[0] - 3.0 * 10.0).abs() < 1e-12);
            assert!(col.iter().skip(1).all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn lowpass_column_analyzes_to_first_unit_vector() {
        let bank = dct_init(4, 4).unwrap();
        let x = bank.lowpass().clone_owned();
        let c = analyze_matrix(&bank, &DMatrix::from_column_slice(16, 1, x.as_slice())).unwrap();
        assert!((c.0[0] - 1.0).abs() < 1e-14);
        assert!(c.0.iter().skip(1).all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn objective_limits() {
        let bank = dct_init(3, 3).unwrap();
        let x = DMatrix::from_fn(9, 7, |r, c| ((r * 7 + c * 3) % 11) as f64 - 4.0);
        let exact = analyze_matrix(&bank, &x).unwrap();
        assert!(objective(&x, &bank, &exact, 0.0, false).unwrap() < 1e-10);
        let zero = CoefficientMatrix(DMatrix::zeros(9, 7));
        let val = objective(&x, &bank, &zero, 5.0, false).unwrap();
        assert!((val - x.norm_squared()).abs() < 1e-9);
        assert!(objective(&x.columns(0, 3).into_owned(), &bank, &exact, 0.0, false).is_err());
    }

    #[test]
    fn objective_recomputed_from_definitions() {
        let bank = dct_init(2, 2).unwrap();
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 0.5, 0.5, 0.5, 2.5]);
        let c = hard_threshold(&analyze_matrix(&bank, &x).unwrap(), 1.0, false);
        // by hand: residual and support size
        let w = bank.matrix();
        let mut fit = 0.0;
        let mut nnz = 0;
        for j in 0..2 {
            for i in 0..4 {
                let mut rec = 0.0;
                for b in 0..4 {
                    rec += w[(i, b)] * c.0[(b, j)];
                }
                fit += (x[(i, j)] - rec).powi(2);
            }
            nnz += (0..4).filter(|&b| c.0[(b, j)] != 0.0).count();
        }
        let expect = fit + nnz as f64;
        assert!((objective(&x, &bank, &c, 1.0, false).unwrap() - expect).abs() < 1e-12);
    }
}
