use std::fs;
use std::path::Path;
use std::time::Instant;

use ddtf_core::classify::{evaluate, expand_templates, BaseTemplates, LabeledImage, TemplateBank};
use ddtf_core::datagen::{load_manifest, make_dataset, snr_label, Conformation, ImageRecord, Manifest, MANIFEST_FILE};
use ddtf_core::frame::denoise;
use ddtf_core::io::{read_raw, write_raw};
use ddtf_core::ksvd::ksvd_denoise;
use ddtf_core::metrics::psnr;
use ddtf_core::Image;
use rayon::prelude::*;

use crate::config::{BenchmarkConfig, Method};
use crate::error::BenchError;
use crate::report::{BenchReport, ClassificationDetail, ClassificationRow, ErrorStat, ImagePsnr, PsnrRow, PsnrStat, NOISY};

/// Which stages of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub psnr: bool,
    pub classify: bool,
}

impl Stages {
    pub const ALL: Stages = Stages { psnr: true, classify: true };
}

fn class_index(c: Conformation) -> usize {
    Conformation::ALL.iter().position(|&x| x == c).expect("known conformation")
}

fn log(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

/// Loads the dataset manifest, generating the dataset first when absent.
pub fn ensure_dataset(cfg: &BenchmarkConfig) -> Result<Manifest, BenchError> {
    if cfg.data_dir.join(MANIFEST_FILE).is_file() {
        let manifest = load_manifest(&cfg.data_dir)?;
        if manifest.spec != cfg.dataset {
            return Err(BenchError::Config(format!(
                "dataset at {} was generated from a different spec; remove it or point data_dir elsewhere",
                cfg.data_dir.display()
            )));
        }
        return Ok(manifest);
    }
    generate_dataset(cfg)
}

pub fn generate_dataset(cfg: &BenchmarkConfig) -> Result<Manifest, BenchError> {
    let t = Instant::now();
    let manifest = make_dataset(&cfg.dataset, &cfg.data_dir)?;
    log(format!(
        "generated {} images x {} SNR levels in {} ({:.1}s)",
        manifest.images.len(),
        cfg.dataset.snr_grid.len(),
        cfg.data_dir.display(),
        t.elapsed().as_secs_f64()
    ));
    Ok(manifest)
}

/// Test images to denoise: all of them, or `max_images` spread evenly.
pub fn select_tests(manifest: &Manifest, max_images: Option<usize>) -> Vec<&ImageRecord> {
    let tests: Vec<&ImageRecord> = manifest.tests().collect();
    match max_images {
        Some(n) if n < tests.len() => (0..n).map(|i| tests[i * tests.len() / n]).collect(),
        _ => tests,
    }
}

fn read_all(root: &Path, paths: &[&str]) -> Result<Vec<Image>, BenchError> {
    paths
        .par_iter()
        .map(|p| read_raw(&root.join(p)).map_err(BenchError::from))
        .collect()
}

fn noisy_index(record: &ImageRecord, snr: f64) -> Result<usize, BenchError> {
    record
        .noisy
        .iter()
        .position(|n| snr_label(n.snr) == snr_label(snr))
        .ok_or_else(|| BenchError::Runtime(format!("{} has no noisy copy at snr {snr}", record.id)))
}

/// Root-mean-square injected noise level over `records`.
fn injected_sigma(records: &[&ImageRecord], snr: f64) -> Result<f64, BenchError> {
    let mut acc = 0.0;
    for r in records {
        acc += r.noisy[noisy_index(r, snr)?].sigma.powi(2);
    }
    Ok((acc / records.len() as f64).sqrt())
}

pub fn build_templates(cfg: &BenchmarkConfig, manifest: &Manifest) -> Result<TemplateBank, BenchError> {
    let records: Vec<&ImageRecord> = manifest.templates().collect();
    let paths: Vec<&str> = records.iter().map(|r| r.clean.raw.as_str()).collect();
    let images = read_all(&cfg.data_dir, &paths)?;
    let bases = BaseTemplates {
        classes: Conformation::ALL.iter().map(|c| c.label().to_string()).collect(),
        templates: records.iter().map(|r| class_index(r.class)).zip(images).collect(),
    };
    Ok(expand_templates(&bases, cfg.classify.angle_step, cfg.classify.reflection)?)
}

/// Denoises `noisy` with `method`; training uses the leading images.
pub fn denoise_images(
    cfg: &BenchmarkConfig,
    method: Method,
    noisy: &[Image],
    records: &[&ImageRecord],
    snr: f64,
) -> Result<Vec<Image>, BenchError> {
    Ok(match method {
        Method::None => noisy.to_vec(),
        Method::Ddtf => {
            let n = cfg.ddtf.training_images.min(noisy.len());
            let sigma = injected_sigma(&records[..n], snr)?;
            denoise(noisy, &cfg.ddtf.train_config(sigma), n)?
        }
        Method::Ksvd => {
            let n = cfg.ksvd.training_images.min(noisy.len());
            let sigma = injected_sigma(&records[..n], snr)?;
            ksvd_denoise(noisy, &cfg.ksvd.ksvd_config(sigma), n)?
        }
    })
}

fn save_images(cfg: &BenchmarkConfig, method: Method, snr: f64, records: &[&ImageRecord], images: &[Image]) -> Result<(), BenchError> {
    let dir = cfg.out_dir.join("denoised").join(method.label()).join(format!("snr_{}", snr_label(snr)));
    fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
    records
        .par_iter()
        .zip(images)
        .try_for_each(|(r, img)| write_raw(img, &dir.join(format!("{}.f32", r.id))).map_err(BenchError::from))
}

fn classify_images(
    bank: &TemplateBank,
    records: &[&ImageRecord],
    images: &[Image],
) -> Result<ddtf_core::ClassificationReport, BenchError> {
    let labeled: Vec<LabeledImage> = records
        .iter()
        .zip(images)
        .map(|(r, img)| LabeledImage {
            id: r.id.clone(),
            class: class_index(r.class),
            image: img.clone(),
        })
        .collect();
    Ok(evaluate(&labeled, bank)?)
}

/// Runs the selected stages with the calling thread's rayon pool.
pub fn run_stages(cfg: &BenchmarkConfig, stages: Stages, save: bool) -> Result<BenchReport, BenchError> {
    cfg.validate()?;
    let manifest = ensure_dataset(cfg)?;
    let records = select_tests(&manifest, cfg.max_images);
    if records.is_empty() {
        return Err(BenchError::Runtime("dataset has no test images".into()));
    }
    let clean_paths: Vec<&str> = records.iter().map(|r| r.clean.raw.as_str()).collect();
    let clean = read_all(&cfg.data_dir, &clean_paths)?;
    let methods = cfg.active_methods();
    let snrs = cfg.selected_snrs();
    let bank = if stages.classify && snrs.iter().any(|&s| cfg.classifies(s)) {
        let t = Instant::now();
        let bank = build_templates(cfg, &manifest)?;
        log(format!("expanded {} templates ({:.1}s)", bank.len(), t.elapsed().as_secs_f64()));
        Some(bank)
    } else {
        None
    };

    let mut report = BenchReport::default();
    for &snr in &snrs {
        let idx: Vec<usize> = records.iter().map(|r| noisy_index(r, snr)).collect::<Result<_, _>>()?;
        let paths: Vec<&str> = records.iter().zip(&idx).map(|(r, &i)| r.noisy[i].files.raw.as_str()).collect();
        let noisy = read_all(&cfg.data_dir, &paths)?;
        let mut outputs: Vec<(String, Vec<Image>)> = Vec::with_capacity(methods.len() + 1);
        for &method in &methods {
            let t = Instant::now();
            let images = denoise_images(cfg, method, &noisy, &records, snr)?;
            log(format!(
                "snr {}: {method} denoised {} images ({:.1}s)",
                snr_label(snr),
                images.len(),
                t.elapsed().as_secs_f64()
            ));
            if save {
                save_images(cfg, method, snr, &records, &images)?;
            }
            outputs.push((method.label().to_string(), images));
        }
        outputs.insert(0, (NOISY.to_string(), noisy));

        if stages.psnr {
            let mut row = PsnrRow { snr, methods: Vec::new() };
            for (name, images) in &outputs {
                let values = clean
                    .par_iter()
                    .zip(images)
                    .map(|(c, d)| psnr(c, d))
                    .collect::<Result<Vec<f64>, _>>()?;
                for (r, &v) in records.iter().zip(&values) {
                    report.per_image_psnr.push(ImagePsnr {
                        snr,
                        method: name.clone(),
                        image_id: r.id.clone(),
                        psnr: v,
                    });
                }
                row.methods.push(PsnrStat::from_values(name, &values));
            }
            report.psnr.push(row);
        }

        if let (Some(bank), true) = (&bank, cfg.classifies(snr)) {
            let mut row = ClassificationRow { snr, methods: Vec::new() };
            for (name, images) in &outputs {
                let t = Instant::now();
                let r = classify_images(bank, &records, images)?;
                log(format!(
                    "snr {}: classified {name} images, error {:.2}% ({:.1}s)",
                    snr_label(snr),
                    100.0 * r.error_rate,
                    t.elapsed().as_secs_f64()
                ));
                row.methods.push(ErrorStat {
                    method: name.clone(),
                    errors: r.errors,
                    images: r.rows.len(),
                    error_rate: r.error_rate,
                });
                report.details.push(ClassificationDetail {
                    snr,
                    method: name.clone(),
                    report: r,
                });
            }
            report.classification.push(row);
        }
    }
    Ok(report)
}

/// Runs `f` on a pool with `jobs` threads (0 = all cores).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

/// Full pipeline: data generation if needed, denoising, PSNR and
/// classification tables, report files under `cfg.out_dir`.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchReport, BenchError> {
    let report = with_jobs(cfg.jobs, || run_stages(cfg, Stages::ALL, cfg.save_images))??;
    report.write(&cfg.out_dir)?;
    Ok(report)
}
