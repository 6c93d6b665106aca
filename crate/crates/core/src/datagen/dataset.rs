use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phantom::{make_phantom, Conformation};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::io::{write_pgm, write_raw};
use crate::noise::{add_gaussian_noise, noise_variance, NoiseSpec};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub image_size: usize,
    pub open_count: usize,
    pub close_count: usize,
    /// Templates per class.
    pub template_count: usize,
    pub snr_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            image_size: 128,
            open_count: 420,
            close_count: 429,
            template_count: 31,
            snr_grid: vec![0.8, 0.4, 0.2, 0.1, 0.05, 0.01],
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 32 {
            return Err(Error::InvalidParameter(format!(
                "image_size must be at least 32, got {}",
                self.image_size
            )));
        }
        for (name, count) in [("open_count", self.open_count), ("close_count", self.close_count)] {
            if count < self.template_count + 1 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {count} must exceed template_count = {}",
                    self.template_count
                )));
            }
        }
        if self.template_count == 0 {
            return Err(Error::InvalidParameter("template_count must be positive".into()));
        }
        for (i, &snr) in self.snr_grid.iter().enumerate() {
            NoiseSpec::new(snr, 0)?;
            if self.snr_grid[..i].iter().any(|&s| snr_label(s) == snr_label(snr)) {
                return Err(Error::InvalidParameter(format!("duplicate snr {snr}")));
            }
        }
        Ok(())
    }

    pub fn count(&self, class: Conformation) -> usize {
        match class {
            Conformation::Open => self.open_count,
            Conformation::Close => self.close_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Template,
    Test,
}

/// Paths relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    pub pgm: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoisyRecord {
    pub snr: f64,
    pub seed: u64,
    pub sigma: f64,
    pub files: FileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    pub class: Conformation,
    pub rotation: f64,
    pub jitter_seed: u64,
    pub role: Role,
    pub clean: FileRef,
    pub noisy: Vec<NoisyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub images: Vec<ImageRecord>,
}

impl Manifest {
    pub fn templates(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.iter().filter(|r| r.role == Role::Template)
    }

    pub fn tests(&self) -> impl Iterator<Item = &ImageRecord> {
        self.images.iter().filter(|r| r.role == Role::Test)
    }
}

/// Directory name fragment for an SNR level, e.g. `0.05`.
pub fn snr_label(snr: f64) -> String {
    format!("{snr}")
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

const TAG_ROTATION: u64 = 1;
const TAG_TEMPLATES: u64 = 2;
const TAG_JITTER: u64 = 3;
const TAG_NOISE: u64 = 4;

fn class_tag(class: Conformation) -> u64 {
    match class {
        Conformation::Open => 0,
        Conformation::Close => 1,
    }
}

/// Builds the manifest (records, seeds, roles, relative paths) without
/// rendering anything. Noise `sigma` values are filled in by
/// [`make_dataset`].
pub fn plan_dataset(spec: &DatasetSpec) -> Result<Manifest> {
    spec.validate()?;
    let mut images = Vec::with_capacity(spec.open_count + spec.close_count);
    for class in Conformation::ALL {
        let n = spec.count(class);
        let ctag = class_tag(class);
        let step = 360.0 / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, TAG_ROTATION, ctag]));
        let offset = rng.random_range(0.0..step);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, TAG_TEMPLATES, ctag]));
        let mut is_template = vec![false; n];
        for i in sample(&mut rng, n, spec.template_count) {
            is_template[i] = true;
        }
        for i in 0..n {
            let id = format!("{}_{:04}", class.label(), i);
            let file = |dir: String| FileRef {
                pgm: format!("{dir}/{}/{id}.pgm", class.label()),
                raw: format!("{dir}/{}/{id}.f32", class.label()),
            };
            let noisy = spec
                .snr_grid
                .iter()
                .map(|&snr| NoisyRecord {
                    snr,
                    seed: derive_seed(&[spec.seed, TAG_NOISE, ctag, i as u64, snr.to_bits()]),
                    sigma: 0.0,
                    files: file(format!("noisy/snr_{}", snr_label(snr))),
                })
                .collect();
            images.push(ImageRecord {
                clean: file("clean".into()),
                id,
                class,
                rotation: offset + i as f64 * step,
                jitter_seed: derive_seed(&[spec.seed, TAG_JITTER, ctag, i as u64]),
                role: if is_template[i] { Role::Template } else { Role::Test },
                noisy,
            });
        }
    }
    Ok(Manifest {
        spec: spec.clone(),
        images,
    })
}

pub fn render_clean(record: &ImageRecord, size: usize) -> Result<Image> {
    make_phantom(record.class, record.rotation, record.jitter_seed, size)
}

pub fn render_noisy(clean: &Image, noisy: &NoisyRecord) -> Result<Image> {
    add_gaussian_noise(clean, &NoiseSpec::new(noisy.snr, noisy.seed)?)
}

fn write_pair(root: &Path, files: &FileRef, img: &Image) -> Result<()> {
    let pgm = root.join(&files.pgm);
    if let Some(dir) = pgm.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_pgm(img, &pgm)?;
    write_raw(img, &root.join(&files.raw))
}

/// Renders every image of `spec` under `output_dir` and writes
/// `manifest.json` last.
pub fn make_dataset(spec: &DatasetSpec, output_dir: &Path) -> Result<Manifest> {
    let mut manifest = plan_dataset(spec)?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    manifest.images.par_iter_mut().try_for_each(|record| -> Result<()> {
        let clean = render_clean(record, spec.image_size)?;
        write_pair(output_dir, &record.clean, &clean)?;
        let variance = noise_variance(&clean, 1.0)?;
        for noisy in &mut record.noisy {
            noisy.sigma = (variance / noisy.snr).sqrt();
            write_pair(output_dir, &noisy.files, &render_noisy(&clean, noisy)?)?;
        }
        Ok(())
    })?;
    let path = output_dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_manifest(root: &Path) -> Result<Manifest> {
    let path: PathBuf = root.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Format {
        path,
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn tiny() -> DatasetSpec {
        DatasetSpec {
            image_size: 32,
            open_count: 2,
            close_count: 2,
            template_count: 1,
            snr_grid: vec![0.1],
            seed: 7,
        }
    }

    fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn tiny_spec_counts() {
        let dir = tempfile::tempdir().unwrap();
        let m = make_dataset(&tiny(), dir.path()).unwrap();
        assert_eq!(m.images.len(), 4);
        assert_eq!(m.templates().count(), 2);
        assert_eq!(m.tests().count(), 2);
        let files = tree(dir.path());
        let count = |prefix: &str, ext: &str| {
            files
                .keys()
                .filter(|p| p.starts_with(prefix) && p.extension().unwrap() == ext)
                .count()
        };
        assert_eq!(count("clean", "pgm"), 4);
        assert_eq!(count("noisy/snr_0.1", "pgm"), 4);
        assert_eq!(count("noisy/snr_0.1", "f32"), 4);
        assert!(files.contains_key(Path::new(MANIFEST_FILE)));
        assert_eq!(load_manifest(dir.path()).unwrap(), m);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        make_dataset(&tiny(), a.path()).unwrap();
        make_dataset(&tiny(), b.path()).unwrap();
        assert_eq!(tree(a.path()), tree(b.path()));
    }

    #[test]
    fn default_counts_and_disjoint_roles() {
        let spec = DatasetSpec::default();
        let m = plan_dataset(&spec).unwrap();
        assert_eq!(m.images.len(), 849);
        for class in Conformation::ALL {
            let of_class: Vec<_> = m.images.iter().filter(|r| r.class == class).collect();
            assert_eq!(of_class.len(), spec.count(class));
            assert_eq!(of_class.iter().filter(|r| r.role == Role::Template).count(), 31);
        }
        assert!(m.images.iter().all(|r| r.noisy.len() == 6));
        let mut seeds: Vec<u64> = m.images.iter().flat_map(|r| r.noisy.iter().map(|n| n.seed)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 849 * 6);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = tiny();
        s.template_count = 2;
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.image_size = 16;
        assert!(s.validate().is_err());
        let mut s = tiny();
        s.snr_grid = vec![0.0];
        assert!(s.validate().is_err());
    }
}
