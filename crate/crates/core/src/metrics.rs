//! Fidelity metrics. PSNR uses a fixed peak of 255.

use crate::error::Result;
use crate::image::Image;

pub const PSNR_PEAK: f64 = 255.0;

pub fn mse(reference: &Image, estimate: &Image) -> Result<f64> {
    reference.check_same_dims(estimate)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(estimate.pixels())
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(sum / reference.pixels().len() as f64)
}

/// `10 log10(255^2 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(reference: &Image, estimate: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(reference, estimate)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PSNR_PEAK * PSNR_PEAK / mse).log10()
    }
}
