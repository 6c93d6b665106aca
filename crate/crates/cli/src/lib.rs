//! Benchmark harness: phantom data generation, denoising with DDTF or
//! K-SVD, PSNR tables and template-matching classification reports.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{BenchmarkConfig, ClassifySettings, DdtfSettings, KsvdSettings, Method};
pub use error::BenchError;
pub use pipeline::{ensure_dataset, generate_dataset, run_benchmark, run_stages, with_jobs, Stages};
pub use report::BenchReport;
