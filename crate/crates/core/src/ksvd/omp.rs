//! Orthogonal matching pursuit.
//!
//! Correlations with the residual are tracked through the Gram matrix
//! (`D^T r = D^T x - G[:, S] c`) and the least-squares refit on the support
//! uses an incrementally grown Cholesky factor of `G[S, S]`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::Dictionary;
use crate::error::{Error, Result};

/// Columns per batched correlation product.
const BATCH_COLUMNS: usize = 2048;

/// Atoms whose new Cholesky pivot falls below this are numerically dependent
/// on the current support and are skipped.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCode {
    /// Selected atoms in selection order.
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
}

impl SparseCode {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// OMP coder with the Gram matrix of a fixed dictionary precomputed.
pub struct OmpCoder<'a> {
    dict: &'a Dictionary,
    atoms_t: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl<'a> OmpCoder<'a> {
    pub fn new(dict: &'a Dictionary) -> Self {
        let atoms_t = dict.atoms().transpose();
        let gram = &atoms_t * dict.atoms();
        Self { dict, atoms_t, gram }
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    pub fn encode(&self, x: &[f64], sparsity: usize, residual_tol: f64) -> Result<SparseCode> {
        if x.len() != self.dict.atom_dim() {
            return Err(Error::mismatch(format!("{} entries", self.dict.atom_dim()), x.len()));
        }
        let xv = DVector::from_column_slice(x);
        let corr = &self.atoms_t * &xv;
        Ok(self.encode_from_correlations(corr.as_slice(), xv.norm_squared(), sparsity, residual_tol))
    }

    /// Encodes every column of `x`. Results are in column order and do not
    /// depend on the number of worker threads.
    pub fn encode_columns(&self, x: &DMatrix<f64>, sparsity: usize, residual_tol: f64) -> Result<Vec<SparseCode>> {
        if x.nrows() != self.dict.atom_dim() {
            return Err(Error::mismatch(format!("{} rows", self.dict.atom_dim()), x.nrows()));
        }
        let starts: Vec<usize> = (0..x.ncols()).step_by(BATCH_COLUMNS).collect();
        let blocks: Vec<Vec<SparseCode>> = starts
            .par_iter()
            .map(|&start| {
                let width = BATCH_COLUMNS.min(x.ncols() - start);
                let block = x.columns(start, width);
                let corr = &self.atoms_t * block;
                (0..width)
                    .map(|j| {
                        let norm2 = block.column(j).norm_squared();
                        self.encode_from_correlations(corr.column(j).as_slice(), norm2, sparsity, residual_tol)
                    })
                    .collect()
            })
            .collect();
        Ok(blocks.into_iter().flatten().collect())
    }

    /// Greedy selection given `D^T x` and `||x||^2`.
    pub fn encode_from_correlations(&self, corr0: &[f64], norm2: f64, sparsity: usize, residual_tol: f64) -> SparseCode {
        let d = corr0.len();
        let tol2 = residual_tol * residual_tol;
        let mut residual_corr = corr0.to_vec();
        let mut excluded = vec![false; d];
        let mut support: Vec<usize> = Vec::with_capacity(sparsity);
        // row-major lower-triangular Cholesky factor of G[S, S]
        let mut chol: Vec<f64> = Vec::with_capacity(sparsity * sparsity);
        let mut coefs: Vec<f64> = Vec::new();
        let mut res2 = norm2;
        let floor = 1e-12 * norm2.sqrt();

        while support.len() < sparsity && res2 > tol2 {
            let mut best = None;
            let mut best_val = floor;
            for (j, &c) in residual_corr.iter().enumerate() {
                if !excluded[j] && c.abs() > best_val {
                    best_val = c.abs();
                    best = Some(j);
                }
            }
            let Some(j) = best else { break };
            excluded[j] = true;

            // extend the Cholesky factor with row [w, pivot]
            let s = support.len();
            let mut w = vec![0.0; s];
            for r in 0..s {
                let mut acc = self.gram[(support[r], j)];
                for c in 0..r {
                    acc -= chol[r * sparsity + c] * w[c];
                }
                w[r] = acc / chol[r * sparsity + r];
            }
            let pivot2 = self.gram[(j, j)] - w.iter().map(|v| v * v).sum::<f64>();
            if pivot2 <= PIVOT_TOL {
                continue;
            }
            chol.resize((s + 1) * sparsity, 0.0);
            chol[s * sparsity..s * sparsity + s].copy_from_slice(&w);
            chol[s * sparsity + s] = pivot2.sqrt();
            support.push(j);

            // solve L L^T c = corr0[S]
            let n = support.len();
            let mut y = vec![0.0; n];
            for r in 0..n {
                let mut acc = corr0[support[r]];
                for c in 0..r {
                    acc -= chol[r * sparsity + c] * y[c];
                }
                y[r] = acc / chol[r * sparsity + r];
            }
            coefs = vec![0.0; n];
            for r in (0..n).rev() {
                let mut acc = y[r];
                for c in r + 1..n {
                    acc -= chol[c * sparsity + r] * coefs[c];
                }
                coefs[r] = acc / chol[r * sparsity + r];
            }

            residual_corr.copy_from_slice(corr0);
            for (&atom, &c) in support.iter().zip(&coefs) {
                let g = self.gram.column(atom);
                for (rc, gv) in residual_corr.iter_mut().zip(g.iter()) {
                    *rc -= gv * c;
                }
            }
            let explained: f64 = support.iter().zip(&coefs).map(|(&a, c)| c * corr0[a]).sum();
            res2 = (norm2 - explained).max(0.0);
        }

        SparseCode {
            indices: support,
            coefficients: coefs,
            residual_norm: res2.sqrt(),
        }
    }
}

/// Single-vector OMP: at most `target_sparsity` atoms, stopping early once
/// the residual norm is at most `residual_tol`. Ties in the correlation
/// maximum go to the lowest atom index.
pub fn omp_encode(dict: &Dictionary, x: &[f64], target_sparsity: usize, residual_tol: f64) -> Result<SparseCode> {
    OmpCoder::new(dict).encode(x, target_sparsity, residual_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_atom_is_one_term() {
        let dict = Dictionary::random(2, 3, 10, 3).unwrap();
        let atom: Vec<f64> = dict.atoms().column(4).iter().copied().collect();
        let code = omp_encode(&dict, &atom, 3, 1e-9).unwrap();
        assert_eq!(code.indices, vec![4]);
        assert!((code.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(code.residual_norm < 1e-6);
    }

    #[test]
    fn zero_vector_gives_empty_code() {
        let dict = Dictionary::random(2, 2, 6, 1).unwrap();
        let code = omp_encode(&dict, &[0.0; 4], 3, 0.0).unwrap();
        assert!(code.is_empty());
        assert_eq!(code.residual_norm, 0.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // identity atoms plus duplicates; x has equal weight on atoms 1 and 2
        let mut atoms = DMatrix::identity(3, 5);
        atoms.set_column(3, &nalgebra::Vector3::new(1.0, 0.0, 0.0));
        atoms.set_column(4, &nalgebra::Vector3::new(0.0, 1.0, 0.0));
        let dict = Dictionary::new(1, 3, atoms).unwrap();
        let code = omp_encode(&dict, &[0.0, 2.0, 2.0], 1, 0.0).unwrap();
        assert_eq!(code.indices, vec![1]);
    }

    #[test]
    fn support_never_exceeds_sparsity() {
        let dict = Dictionary::random(3, 3, 30, 8).unwrap();
        let x = DMatrix::from_fn(9, 50, |r, c| ((r * 13 + c * 7) % 17) as f64 - 8.0);
        let coder = OmpCoder::new(&dict);
        for s in 1..5 {
            for code in coder.encode_columns(&x, s, 0.0).unwrap() {
                assert!(code.len() <= s);
            }
        }
    }

    #[test]
    fn residual_norm_matches_direct_computation() {
        let dict = Dictionary::random(2, 3, 12, 2).unwrap();
        let x = [3.0, -1.0, 0.5, 2.0, 0.0, 1.0];
        let code = omp_encode(&dict, &x, 3, 0.0).unwrap();
        let mut r = DVector::from_column_slice(&x);
        for (&a, &c) in code.indices.iter().zip(&code.coefficients) {
            r.axpy(-c, &dict.atoms().column(a), 1.0);
        }
        assert!((r.norm() - code.residual_norm).abs() < 1e-9);
        // least squares: residual orthogonal to the chosen atoms
        for &a in &code.indices {
            assert!(dict.atoms().column(a).dot(&r).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_tolerance_stops_early() {
        let dict = Dictionary::random(2, 2, 8, 4).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        let code = omp_encode(&dict, &x, 4, 100.0).unwrap();
        assert!(code.is_empty());
        let batch = OmpCoder::new(&dict)
            .encode_columns(&DMatrix::from_column_slice(4, 1, &x), 4, 0.5)
            .unwrap();
        assert!(batch[0].residual_norm <= 0.5 || batch[0].len() == 4);
    }
}
