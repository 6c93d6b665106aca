//! K-SVD dictionary learning with orthogonal matching pursuit, used as the
//! comparison baseline for frame denoising.

mod denoise;
mod omp;
mod train;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use denoise::{ksvd_denoise, ksvd_denoise_with_training, KsvdDenoiseOutput};
pub use omp::{omp_encode, OmpCoder, SparseCode};
pub use train::{ksvd_sweep, ksvd_train, ksvd_train_with_trace, reconstruction_error, KsvdOutcome};

/// Overcomplete dictionary of unit-norm atoms stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    k1: usize,
    k2: usize,
    atoms: DMatrix<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DictionaryJson {
    k1: usize,
    k2: usize,
    atom_count: usize,
    columns: Vec<Vec<f64>>,
}

const UNIT_NORM_TOL: f64 = 1e-10;

impl Dictionary {
    pub fn new(k1: usize, k2: usize, atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.nrows() != k1 * k2 {
            return Err(Error::mismatch(format!("{} rows", k1 * k2), atoms.nrows()));
        }
        if atoms.ncols() < atoms.nrows() {
            return Err(Error::InvalidParameter(format!(
                "need at least {} atoms, got {}",
                atoms.nrows(),
                atoms.ncols()
            )));
        }
        if let Some(j) = atoms.column_iter().position(|c| (c.norm() - 1.0).abs() > UNIT_NORM_TOL) {
            return Err(Error::InvalidParameter(format!("atom {j} is not unit norm")));
        }
        Ok(Self { k1, k2, atoms })
    }

    /// Seed-deterministic Gaussian atoms normalized to unit length.
    pub fn random(k1: usize, k2: usize, atom_count: usize, seed: u64) -> Result<Self> {
        let dim = k1 * k2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut atoms = DMatrix::from_fn(dim, atom_count, |_, _| StandardNormal.sample(&mut rng));
        for mut col in atoms.column_iter_mut() {
            let n = col.norm();
            col /= n;
        }
        Self::new(k1, k2, atoms)
    }

    #[inline]
    pub fn atom_dim(&self) -> usize {
        self.atoms.nrows()
    }

    #[inline]
    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    #[inline]
    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.atoms
    }

    pub fn patch_size(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    pub fn max_norm_error(&self) -> f64 {
        self.atoms.column_iter().map(|c| (c.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DictionaryJson {
            k1: self.k1,
            k2: self.k2,
            atom_count: self.atom_count(),
            columns: self.atoms.column_iter().map(|c| c.iter().copied().collect()).collect(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DictionaryJson = serde_json::from_str(text)?;
        let dim = doc.k1 * doc.k2;
        if doc.columns.len() != doc.atom_count || doc.columns.iter().any(|c| c.len() != dim) {
            return Err(Error::mismatch(
                format!("{} atoms of length {dim}", doc.atom_count),
                format!("{} columns", doc.columns.len()),
            ));
        }
        let atoms = DMatrix::from_fn(dim, doc.atom_count, |r, c| doc.columns[c][r]);
        Self::new(doc.k1, doc.k2, atoms)
    }
}

/// K-SVD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsvdConfig {
    pub patch_size: usize,
    /// Number of atoms; `None` means `4 * patch_size^2`.
    pub atom_count: Option<usize>,
    pub target_sparsity: usize,
    pub iterations: usize,
    /// Noise standard deviation used for the residual stopping rule; 0 disables it.
    pub noise_sigma: f64,
    /// OMP stops once the residual norm is at most `residual_gain * noise_sigma * sqrt(k)`.
    pub residual_gain: f64,
    pub training_patch_cap: usize,
    pub stride: usize,
    pub seed: u64,
}

impl Default for KsvdConfig {
    fn default() -> Self {
        Self {
            patch_size: 16,
            atom_count: None,
            target_sparsity: 12,
            iterations: 10,
            noise_sigma: 0.0,
            residual_gain: 1.15,
            training_patch_cap: 20_000,
            stride: 1,
            seed: 0,
        }
    }
}

impl KsvdConfig {
    pub fn atom_dim(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn atoms(&self) -> usize {
        self.atom_count.unwrap_or(4 * self.atom_dim())
    }

    pub fn residual_tol(&self) -> f64 {
        self.residual_gain * self.noise_sigma * (self.atom_dim() as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 2 {
            return Err(Error::InvalidParameter("patch_size must be at least 2".into()));
        }
        if self.target_sparsity == 0 {
            return Err(Error::InvalidParameter("target_sparsity must be at least 1".into()));
        }
        if self.atoms() < self.atom_dim() {
            return Err(Error::InvalidParameter(format!(
                "atom_count {} is below the atom dimension {}",
                self.atoms(),
                self.atom_dim()
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.residual_gain >= 0.0) {
            return Err(Error::InvalidParameter("noise_sigma and residual_gain must be non-negative".into()));
        }
        if self.training_patch_cap == 0 {
            return Err(Error::InvalidParameter("training_patch_cap must be positive".into()));
        }
        if self.stride == 0 || self.stride > self.patch_size {
            return Err(Error::InvalidParameter(format!(
                "stride must be in 1..={}, got {}",
                self.patch_size, self.stride
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_atoms_are_unit_and_seeded() {
        let d = Dictionary::random(3, 3, 20, 5).unwrap();
        assert!(d.max_norm_error() < 1e-12);
        assert_eq!(d, Dictionary::random(3, 3, 20, 5).unwrap());
        assert_ne!(d, Dictionary::random(3, 3, 20, 6).unwrap());
    }

    #[test]
    fn rejects_undercomplete_or_unnormalized() {
        assert!(Dictionary::new(2, 2, DMatrix::identity(4, 3)).is_err());
        let mut m = DMatrix::identity(4, 5);
        m[(0, 4)] = 1.0;
        m[(1, 4)] = 1.0;
        assert!(Dictionary::new(2, 2, m).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = Dictionary::random(2, 3, 8, 1).unwrap();
        let text = d.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["atom_count"], 8);
        assert_eq!(Dictionary::from_json(&text).unwrap(), d);
    }

    #[test]
    fn config_defaults() {
        let cfg = KsvdConfig::default();
        assert_eq!(cfg.atoms(), 1024);
        assert!(cfg.validate().is_ok());
        let bad = KsvdConfig { atom_count: Some(10), ..Default::default() };
        assert!(bad.validate().is_err());
        let cfg = KsvdConfig { noise_sigma: 2.0, ..Default::default() };
        assert!((cfg.residual_tol() - 1.15 * 2.0 * 16.0).abs() < 1e-12);
    }
}
