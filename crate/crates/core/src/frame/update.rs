//! Dictionary update: orthogonal Procrustes solve for the high-pass block
//! with the low-pass filter held fixed.
//!
//! With `A1` fixed, the feasible high-pass blocks are `A2 = B R` for any
//! orthonormal basis `B` of the complement of `A1` and orthogonal `R`. Using
//! the previous high-pass block as `B`, the cross matrix `C = P X alpha_h^T`
//! (`P` projecting out `A1`) has coordinates `M = B^T C`, and the optimal
//! rotation is `R = U V^T` from the SVD `M = U S V^T`. The new block is then
//! `B U V^T`, which equals the `U V^T` factor of the SVD of `C` itself.

use nalgebra::{DMatrix, DVector};

use super::bank::FilterBank;
use super::coding::CoefficientMatrix;
use crate::error::{Error, Result};

/// Singular values at or below `RANK_TOL * s_max` are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Relative size under which the cross matrix is considered zero.
const DEGENERATE_TOL: f64 = 1e-12;

/// Solves for the optimal high-pass block given patches and codes.
///
/// Returns `W_prev` unchanged when the cross matrix vanishes (for example
/// all-constant patches, or codes with no high-pass energy).
pub fn update_dictionary(
    patches: &DMatrix<f64>,
    coeffs: &CoefficientMatrix,
    prev: &FilterBank,
) -> Result<FilterBank> {
    Ok(procrustes_update(patches, coeffs, prev)?.unwrap_or_else(|| prev.clone()))
}

/// Like [`update_dictionary`], but reports the degenerate case as `None`.
pub(crate) fn procrustes_update(
    patches: &DMatrix<f64>,
    coeffs: &CoefficientMatrix,
    prev: &FilterBank,
) -> Result<Option<FilterBank>> {
    let k = prev.patch_dim();
    if patches.nrows() != k || coeffs.bands() != k {
        return Err(Error::mismatch(format!("{k} rows"), format!("{} / {}", patches.nrows(), coeffs.bands())));
    }
    if patches.ncols() != coeffs.ncols() {
        return Err(Error::mismatch(
            format!("{} coefficient columns", patches.ncols()),
            coeffs.ncols(),
        ));
    }
    let high_codes = coeffs.0.rows(1, k - 1);
    let lowpass = prev.lowpass().clone_owned();

    // C = (I - a1 a1^T)(X - a1 alpha_0) alpha_h^T = (I - a1 a1^T) X alpha_h^T
    let mut cross = patches * high_codes.transpose();
    let along = cross.tr_mul(&lowpass);
    cross -= &lowpass * along.transpose();

    let scale = patches.norm() * coeffs.0.norm();
    if !(cross.norm() > DEGENERATE_TOL * scale) {
        return Ok(None);
    }

    let basis = prev.highpass().clone_owned();
    let coords = basis.tr_mul(&cross);
    let rotation = procrustes_rotation(&coords);

    let mut w = DMatrix::zeros(k, k);
    w.set_column(0, &lowpass);
    w.columns_mut(1, k - 1).copy_from(&(basis * rotation));
    Ok(Some(FilterBank::from_matrix_unchecked(prev.k1(), prev.k2(), w)))
}

/// Orthogonal `R` maximizing `tr(R^T M)` for square `M`.
///
/// Singular pairs with vanishing singular values are not determined by `M`;
/// they are completed by Gram-Schmidt on the standard basis vectors (that is,
/// on the previous filters) in index order, separately for the left and
/// right factors, and paired in that order.
pub(crate) fn procrustes_rotation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let s_max = sv[order[0]];
    let resolved: Vec<usize> = order
        .into_iter()
        .take_while(|&i| sv[i] > RANK_TOL * s_max)
        .collect();

    let mut left: Vec<DVector<f64>> = resolved.iter().map(|&i| u.column(i).into_owned()).collect();
    let mut right: Vec<DVector<f64>> = resolved.iter().map(|&i| v.column(i).into_owned()).collect();
    complete_basis(&mut left, n);
    complete_basis(&mut right, n);

    let mut rotation = DMatrix::zeros(n, n);
    for (a, b) in left.iter().zip(&right) {
        rotation += a * b.transpose();
    }
    rotation
}

/// Extends orthonormal `vectors` to a basis of R^n using `e_0, e_1, ...`.
fn complete_basis(vectors: &mut Vec<DVector<f64>>, n: usize) {
    for j in 0..n {
        if vectors.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for q in vectors.iter() {
                let proj = q.dot(&e);
                e.axpy(-proj, q, 1.0);
            }
        }
        let norm = e.norm();
        if norm > 1e-6 {
            vectors.push(e / norm);
        }
    }
    debug_assert_eq!(vectors.len(), n);
}
