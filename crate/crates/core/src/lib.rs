//! Multi-image data-driven tight frame (DDTF) denoising for low-SNR images.
//!
//! * [`frame`]: orthogonal filter-bank learning and denoising.
//! * [`ksvd`]: K-SVD dictionary learning with OMP coding, used as a baseline.
//! * [`classify`]: rotation/reflection-expanded nearest-template classification.
//! * [`datagen`]: deterministic two-conformation phantom datasets.
//!
//! Shared image plumbing lives in [`image`], [`patches`], [`noise`],
//! [`metrics`] and [`io`].

pub mod classify;
pub mod datagen;
pub mod error;
pub mod frame;
pub mod image;
pub mod io;
pub mod ksvd;
pub mod metrics;
pub mod noise;
pub mod patches;

pub use classify::{BaseTemplates, ClassificationReport, TemplateBank};
pub use datagen::{Conformation, DatasetSpec, Manifest};
pub use error::{Error, Result};
pub use frame::{FilterBank, TrainConfig};
pub use image::Image;
pub use noise::NoiseSpec;
pub use patches::{assemble_patches, extract_patches, PatchGeometry, PatchMatrix};
