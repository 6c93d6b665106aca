use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ddtf_core::datagen::{snr_label, DatasetSpec};
use ddtf_core::frame::{universal_threshold, TrainConfig};
use ddtf_core::ksvd::KsvdConfig;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ddtf,
    Ksvd,
    None,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Ddtf => "ddtf",
            Method::Ksvd => "ksvd",
            Method::None => "none",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "ddtf" => Ok(Method::Ddtf),
            "ksvd" => Ok(Method::Ksvd),
            "none" => Ok(Method::None),
            other => Err(BenchError::Config(format!("unknown method `{other}` (expected ddtf, ksvd or none)"))),
        }
    }
}

/// DDTF settings. The threshold is `threshold` when given, otherwise
/// `threshold_scale * sigma * sqrt(2 ln k)` with the injected noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdtfSettings {
    pub patch_size: usize,
    pub threshold: Option<f64>,
    pub threshold_scale: f64,
    pub iterations: usize,
    pub convergence_tol: f64,
    pub training_patch_cap: usize,
    pub stride: usize,
    pub protect_lowpass: bool,
    pub seed: u64,
    /// Number of images whose patches train the shared bank.
    pub training_images: usize,
}

impl Default for DdtfSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            patch_size: t.patch_size,
            threshold: None,
            threshold_scale: 1.0,
            iterations: t.iterations,
            convergence_tol: t.convergence_tol,
            training_patch_cap: t.training_patch_cap,
            stride: t.stride,
            protect_lowpass: t.protect_lowpass,
            seed: t.seed,
            training_images: 20,
        }
    }
}

impl DdtfSettings {
    pub fn train_config(&self, sigma: f64) -> TrainConfig {
        let k = self.patch_size * self.patch_size;
        TrainConfig {
            patch_size: self.patch_size,
            threshold: self
                .threshold
                .unwrap_or_else(|| universal_threshold(sigma, k, self.threshold_scale)),
            iterations: self.iterations,
            convergence_tol: self.convergence_tol,
            training_patch_cap: self.training_patch_cap,
            stride: self.stride,
            protect_lowpass: self.protect_lowpass,
            seed: self.seed,
        }
    }
}

/// K-SVD settings; the residual stopping rule uses the injected noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsvdSettings {
    pub patch_size: usize,
    pub atom_count: Option<usize>,
    pub target_sparsity: usize,
    pub iterations: usize,
    pub residual_gain: f64,
    pub training_patch_cap: usize,
    pub stride: usize,
    pub seed: u64,
    pub training_images: usize,
}

impl Default for KsvdSettings {
    fn default() -> Self {
        let k = KsvdConfig::default();
        Self {
            patch_size: k.patch_size,
            atom_count: k.atom_count,
            target_sparsity: k.target_sparsity,
            iterations: k.iterations,
            residual_gain: k.residual_gain,
            training_patch_cap: k.training_patch_cap,
            stride: k.stride,
            seed: k.seed,
            training_images: 20,
        }
    }
}

impl KsvdSettings {
    pub fn ksvd_config(&self, sigma: f64) -> KsvdConfig {
        KsvdConfig {
            patch_size: self.patch_size,
            atom_count: self.atom_count,
            target_sparsity: self.target_sparsity,
            iterations: self.iterations,
            noise_sigma: sigma,
            residual_gain: self.residual_gain,
            training_patch_cap: self.training_patch_cap,
            stride: self.stride,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySettings {
    pub enabled: bool,
    /// Template rotation step in degrees; must divide 360.
    pub angle_step: f64,
    pub reflection: bool,
    /// SNR levels that get a classification row.
    pub snr_grid: Vec<f64>,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        Self {
            enabled: true,
            angle_step: 10.0,
            reflection: true,
            snr_grid: vec![0.8, 0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub dataset: DatasetSpec,
    /// Dataset root; generated there when no manifest exists.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub methods: Vec<Method>,
    /// Subset of `dataset.snr_grid` to run; all levels when absent.
    pub snrs: Option<Vec<f64>>,
    /// Cap on test images per SNR level, picked evenly across the test set.
    pub max_images: Option<usize>,
    pub ddtf: DdtfSettings,
    pub ksvd: KsvdSettings,
    pub classify: ClassifySettings,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    /// Also write denoised images under `<out_dir>/denoised`.
    pub save_images: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("reports"),
            methods: vec![Method::Ddtf, Method::Ksvd],
            snrs: None,
            max_images: None,
            ddtf: DdtfSettings::default(),
            ksvd: KsvdSettings::default(),
            classify: ClassifySettings::default(),
            jobs: 1,
            save_images: false,
        }
    }
}

fn same_level(a: f64, b: f64) -> bool {
    snr_label(a) == snr_label(b)
}

impl BenchmarkConfig {
    /// Parses a JSON config; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.data_dir = base.join(&cfg.data_dir);
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let cfg_err = |e: ddtf_core::Error| BenchError::Config(e.to_string());
        self.dataset.validate().map_err(cfg_err)?;
        self.ddtf.train_config(1.0).validate().map_err(cfg_err)?;
        self.ksvd.ksvd_config(1.0).validate().map_err(cfg_err)?;
        if let Some(t) = self.ddtf.threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(BenchError::Config(format!("ddtf.threshold must be non-negative, got {t}")));
            }
        }
        if !(self.ddtf.threshold_scale >= 0.0 && self.ddtf.threshold_scale.is_finite()) {
            return Err(BenchError::Config("ddtf.threshold_scale must be non-negative".into()));
        }
        if self.ddtf.training_images == 0 || self.ksvd.training_images == 0 {
            return Err(BenchError::Config("training_images must be positive".into()));
        }
        if self.max_images == Some(0) {
            return Err(BenchError::Config("max_images must be positive".into()));
        }
        if let Some(snrs) = &self.snrs {
            for &s in snrs {
                if !self.dataset.snr_grid.iter().any(|&g| same_level(g, s)) {
                    return Err(BenchError::Config(format!("snr {s} is not in dataset.snr_grid")));
                }
            }
        }
        if self.classify.enabled {
            ddtf_core::classify::rotation_angles(self.classify.angle_step).map_err(cfg_err)?;
        }
        Ok(())
    }

    /// SNR levels to run, in dataset grid order.
    pub fn selected_snrs(&self) -> Vec<f64> {
        self.dataset
            .snr_grid
            .iter()
            .copied()
            .filter(|&g| self.snrs.as_ref().is_none_or(|s| s.iter().any(|&x| same_level(x, g))))
            .collect()
    }

    pub fn classifies(&self, snr: f64) -> bool {
        self.classify.enabled && self.classify.snr_grid.iter().any(|&g| same_level(g, snr))
    }

    /// Denoising methods in config order, without `none` and duplicates.
    pub fn active_methods(&self) -> Vec<Method> {
        let mut out = Vec::new();
        for &m in &self.methods {
            if m != Method::None && !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }
}
