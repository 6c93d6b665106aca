use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::{dct_init, FilterBank};
use super::coding::{analyze_matrix, hard_threshold_in_place, objective};
use super::update::procrustes_update;
use crate::error::{Error, Result};
use crate::patches::PatchMatrix;

/// Hyperparameters for learning a filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Square patch side (`k1 = k2`).
    pub patch_size: usize,
    /// Hard threshold in intensity units; used for training and denoising.
    pub threshold: f64,
    pub iterations: usize,
    /// Stop when the relative objective decrease over an iteration falls below this.
    pub convergence_tol: f64,
    /// Maximum number of patch columns used for training.
    pub training_patch_cap: usize,
    pub stride: usize,
    pub protect_lowpass: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            patch_size: 16,
            threshold: 0.0,
            iterations: 8,
            convergence_tol: 1e-4,
            training_patch_cap: 50_000,
            stride: 1,
            protect_lowpass: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 2 {
            return Err(Error::InvalidParameter("patch_size must be at least 2".into()));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be finite and non-negative, got {}",
                self.threshold
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be at least 1".into()));
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

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bank: FilterBank,
    /// Objective after every half-step: coding, update, coding, update, ...
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    /// Number of patch columns actually used.
    pub training_columns: usize,
}

/// Seeded uniform column subsample, kept in original column order.
pub fn subsample_columns(x: &DMatrix<f64>, cap: usize, seed: u64) -> DMatrix<f64> {
    if x.ncols() <= cap {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, x.ncols(), cap).into_vec();
    picked.sort_unstable();
    x.select_columns(picked.iter())
}

pub fn train(patches: &PatchMatrix, cfg: &TrainConfig) -> Result<FilterBank> {
    Ok(train_with_trace(patches, cfg)?.bank)
}

/// Alternates hard-threshold coding and the orthogonal dictionary update,
/// starting from the DCT bank.
pub fn train_with_trace(patches: &PatchMatrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let g = patches.geometry();
    let bank = dct_init(g.patch_width, g.patch_height)?;
    train_matrix(patches.data(), bank, cfg)
}

pub(crate) fn train_matrix(x: &DMatrix<f64>, mut bank: FilterBank, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if x.ncols() == 0 {
        return Err(Error::EmptyInput("no training patches".into()));
    }
    if x.nrows() != bank.patch_dim() {
        return Err(Error::mismatch(format!("{} rows", bank.patch_dim()), x.nrows()));
    }
    let x = subsample_columns(x, cfg.training_patch_cap, cfg.seed);
    let (lambda, protect) = (cfg.threshold, cfg.protect_lowpass);

    let mut trace = Vec::with_capacity(2 * cfg.iterations);
    let mut previous: Option<f64> = None;
    let mut done = 0;
    for _ in 0..cfg.iterations {
        let mut codes = analyze_matrix(&bank, &x)?;
        hard_threshold_in_place(&mut codes, lambda, protect);
        let coded = objective(&x, &bank, &codes, lambda, protect)?;
        trace.push(coded);
        let reference = previous.unwrap_or(coded);

        if let Some(mut next) = procrustes_update(&x, &codes, &bank)? {
            // flip the matching code rows so (W, alpha) describes the same model
            for (row, flipped) in next.canonicalize_signs().into_iter().enumerate() {
                if flipped {
                    codes.0.row_mut(row).neg_mut();
                }
            }
            bank = next;
        }
        let updated = objective(&x, &bank, &codes, lambda, protect)?;
        trace.push(updated);
        done += 1;

        if reference <= 0.0 || (reference - updated) / reference < cfg.convergence_tol {
            break;
        }
        previous = Some(updated);
    }
    Ok(TrainOutcome {
        bank,
        objective_trace: trace,
        iterations: done,
        training_columns: x.ncols(),
    })
}
