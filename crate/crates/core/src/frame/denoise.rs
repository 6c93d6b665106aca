use rayon::prelude::*;

use super::bank::{dct_init, FilterBank};
use super::coding::{analyze, hard_threshold_in_place, synthesize};
use super::train::{train_with_trace, TrainConfig, TrainOutcome};
use crate::error::{Error, Result};
use crate::image::{common_dims, Image};
use crate::patches::{assemble_patches, extract_patches};

/// MAD-to-sigma factor for Gaussian data.
const MAD_SCALE: f64 = 1.4826;

/// `scale * sigma * sqrt(2 ln k)` for patch dimension `k`.
pub fn universal_threshold(sigma: f64, patch_dim: usize, scale: f64) -> f64 {
    scale * sigma * (2.0 * (patch_dim as f64).ln()).sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Robust noise level from the finest DCT detail band of non-overlapping
/// patches: `1.4826 * median(|c - median(c)|)`.
pub fn estimate_noise_sigma(images: &[Image], patch_size: usize) -> Result<f64> {
    let x = extract_patches(images, patch_size, patch_size, patch_size)?;
    let bank = dct_init(patch_size, patch_size)?;
    let finest = bank.matrix().column(bank.patch_dim() - 1);
    let mut band: Vec<f64> = x.data().column_iter().map(|c| c.dot(&finest)).collect();
    let center = median(&mut band);
    let mut dev: Vec<f64> = band.iter().map(|c| (c - center).abs()).collect();
    Ok(MAD_SCALE * median(&mut dev))
}

/// Denoises one image with a trained bank: `W T(W^T X)` on its patches,
/// then overlap averaging.
pub fn apply_bank(bank: &FilterBank, image: &Image, threshold: f64, stride: usize, protect_lowpass: bool) -> Result<Image> {
    let x = extract_patches(std::slice::from_ref(image), bank.k1(), bank.k2(), stride)?;
    let mut codes = analyze(bank, &x)?;
    hard_threshold_in_place(&mut codes, threshold, protect_lowpass);
    let rec = x.with_data(synthesize(bank, &codes)?)?;
    assemble_patches(&rec, image.dims(), 0)
}

#[derive(Debug, Clone)]
pub struct DenoiseOutput {
    pub images: Vec<Image>,
    pub training: TrainOutcome,
}

/// Multi-image denoising: learns one bank from the patches of the first
/// `training_images` inputs, then applies it to every input independently.
pub fn denoise(images: &[Image], cfg: &TrainConfig, training_images: usize) -> Result<Vec<Image>> {
    Ok(denoise_with_training(images, cfg, training_images)?.images)
}

pub fn denoise_with_training(images: &[Image], cfg: &TrainConfig, training_images: usize) -> Result<DenoiseOutput> {
    cfg.validate()?;
    common_dims(images)?;
    if training_images == 0 || training_images > images.len() {
        return Err(Error::InvalidParameter(format!(
            "training image count must be in 1..={}, got {training_images}",
            images.len()
        )));
    }
    let k = cfg.patch_size;
    let x = extract_patches(&images[..training_images], k, k, cfg.stride)?;
    let training = train_with_trace(&x, cfg)?;
    drop(x);
    let bank = &training.bank;
    let images = images
        .par_iter()
        .map(|img| apply_bank(bank, img, cfg.threshold, cfg.stride, cfg.protect_lowpass))
        .collect::<Result<Vec<_>>>()?;
    Ok(DenoiseOutput { images, training })
}
