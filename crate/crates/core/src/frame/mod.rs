//! Data-driven tight frame learning in patch space.
//!
//! The frame is an orthogonal `k x k` filter bank whose first column is a
//! fixed low-pass filter and whose remaining columns are learned. Training
//! alternates hard-threshold sparse coding with an orthogonal Procrustes
//! update of the high-pass filters; denoising applies `W T(W^T X)` to the
//! patches of each image and averages the overlaps.

mod bank;
mod coding;
mod denoise;
mod train;
mod update;

pub use bank::{dct_ii, dct_init, FilterBank, ORTHOGONALITY_TOL};
pub use coding::{
    analyze, analyze_matrix, hard_threshold, hard_threshold_in_place, objective, synthesize, CoefficientMatrix,
};
pub use denoise::{apply_bank, denoise, denoise_with_training, estimate_noise_sigma, universal_threshold, DenoiseOutput};
pub use train::{subsample_columns as train_subsample, train, train_with_trace, TrainConfig, TrainOutcome};
pub use update::update_dictionary;
