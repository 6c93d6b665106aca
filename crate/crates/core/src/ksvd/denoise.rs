use nalgebra::DMatrix;
use rayon::prelude::*;

use super::omp::OmpCoder;
use super::train::{ksvd_train_with_trace, KsvdOutcome};
use super::{Dictionary, KsvdConfig};
use crate::error::{Error, Result};
use crate::image::{common_dims, Image};
use crate::patches::{assemble_patches, extract_patches};

/// Subtracts each column's mean in place and returns the means.
fn remove_column_means(x: &mut DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.column_iter_mut()
        .map(|mut c| {
            let m = c.sum() / n;
            c.add_scalar_mut(-m);
            m
        })
        .collect()
}

fn denoise_one(dict: &Dictionary, image: &Image, cfg: &KsvdConfig) -> Result<Image> {
    let (k1, k2) = dict.patch_size();
    let patches = extract_patches(std::slice::from_ref(image), k1, k2, cfg.stride)?;
    let mut x = patches.data().clone();
    let means = remove_column_means(&mut x);
    let codes = OmpCoder::new(dict).encode_columns(&x, cfg.target_sparsity, cfg.residual_tol())?;
    let mut rec = DMatrix::zeros(x.nrows(), x.ncols());
    for (j, (code, mean)) in codes.iter().zip(&means).enumerate() {
        let mut col = rec.column_mut(j);
        col.fill(*mean);
        for (&a, &c) in code.indices.iter().zip(&code.coefficients) {
            col.axpy(c, &dict.atoms().column(a), 1.0);
        }
    }
    assemble_patches(&patches.with_data(rec)?, image.dims(), 0)
}

#[derive(Debug, Clone)]
pub struct KsvdDenoiseOutput {
    pub images: Vec<Image>,
    pub training: KsvdOutcome,
}

/// Trains on the mean-removed patches of the first `training_images` inputs,
/// then codes every patch of every image and averages the reconstructions.
pub fn ksvd_denoise(images: &[Image], cfg: &KsvdConfig, training_images: usize) -> Result<Vec<Image>> {
    Ok(ksvd_denoise_with_training(images, cfg, training_images)?.images)
}

pub fn ksvd_denoise_with_training(images: &[Image], cfg: &KsvdConfig, training_images: usize) -> Result<KsvdDenoiseOutput> {
    cfg.validate()?;
    common_dims(images)?;
    if training_images == 0 || training_images > images.len() {
        return Err(Error::InvalidParameter(format!(
            "training image count must be in 1..={}, got {training_images}",
            images.len()
        )));
    }
    let k = cfg.patch_size;
    let mut x = extract_patches(&images[..training_images], k, k, cfg.stride)?.into_data();
    remove_column_means(&mut x);
    let training = ksvd_train_with_trace(&x, k, k, cfg)?;
    drop(x);
    let dict = &training.dictionary;
    let images = images
        .par_iter()
        .map(|img| denoise_one(dict, img, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(KsvdDenoiseOutput { images, training })
}
