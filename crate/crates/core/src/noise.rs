//! Additive white Gaussian noise at a prescribed SNR.
//!
//! SNR follows the power convention `E_s / sigma^2`, where `E_s` is the mean
//! squared pixel value of the clean image. The noisy output is not clamped.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr: f64, seed: u64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::InvalidParameter(format!("snr must be positive, got {snr}")));
        }
        Ok(Self { snr, seed })
    }
}

/// Noise variance that yields `snr` for `img`.
pub fn noise_variance(img: &Image, snr: f64) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::InvalidParameter(format!("snr must be positive, got {snr}")));
    }
    let power = img.mean_square();
    if power == 0.0 {
        return Err(Error::InvalidImage(
            "signal power is zero; noise level is undefined".into(),
        ));
    }
    Ok(power / snr)
}

pub fn add_gaussian_noise(img: &Image, spec: &NoiseSpec) -> Result<Image> {
    let sigma = noise_variance(img, spec.snr)?.sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pixels = img.pixels().iter().map(|&p| p + normal.sample(&mut rng)).collect();
    Image::new(img.width(), img.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_from_definition() {
        // pixels +-1 give E_s = 1
        let img = Image::from_fn(4, 4, |x, y| if (x + y) % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
        assert_eq!(noise_variance(&img, 1.0).unwrap(), 1.0);
        let flat = Image::filled(8, 8, 128.0).unwrap();
        assert!((noise_variance(&flat, 0.1).unwrap() - 163_840.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let img = Image::filled(16, 16, 50.0).unwrap();
        let spec = NoiseSpec::new(0.5, 42).unwrap();
        let a = add_gaussian_noise(&img, &spec).unwrap();
        let b = add_gaussian_noise(&img, &spec).unwrap();
        assert_eq!(a, b);
        let c = add_gaussian_noise(&img, &NoiseSpec::new(0.5, 43).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_zero_image_and_bad_snr() {
        let zero = Image::filled(4, 4, 0.0).unwrap();
        assert!(add_gaussian_noise(&zero, &NoiseSpec { snr: 1.0, seed: 0 }).is_err());
        assert!(NoiseSpec::new(0.0, 0).is_err());
        assert!(NoiseSpec::new(-1.0, 0).is_err());
    }

    #[test]
    fn output_is_not_clamped() {
        let img = Image::filled(32, 32, 1.0).unwrap();
        let noisy = add_gaussian_noise(&img, &NoiseSpec::new(0.01, 3).unwrap()).unwrap();
        assert!(noisy.pixels().iter().any(|&p| p < 0.0));
    }
}
