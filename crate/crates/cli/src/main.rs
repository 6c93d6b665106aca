use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddtf_cli::pipeline::{generate_dataset, run_stages, with_jobs, Stages};
use ddtf_cli::{BenchError, BenchmarkConfig, Method};

/// Multi-image DDTF denoising benchmark.
#[derive(Parser, Debug)]
#[command(name = "ddtf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the phantom dataset described by the config.
    GenData(Common),
    /// Denoise the test images and write them under <out>/denoised.
    Denoise(Common),
    /// Denoise and report PSNR tables.
    Psnr(Common),
    /// Denoise and report classification error tables.
    Classify(Common),
    /// Full pipeline: data, denoising, PSNR and classification reports.
    Bench(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; defaults apply to omitted keys
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Run a single SNR level
    #[arg(long)]
    snr: Option<f64>,
    /// Run a single method (ddtf, ksvd or none)
    #[arg(long)]
    method: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(short, long)]
    jobs: Option<usize>,
    /// Report directory
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Dataset directory
    #[arg(long)]
    data: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<BenchmarkConfig, BenchError> {
        let mut cfg = match &self.config {
            Some(path) => BenchmarkConfig::load(path)?,
            None => BenchmarkConfig::default(),
        };
        if let Some(snr) = self.snr {
            cfg.snrs = Some(vec![snr]);
        }
        if let Some(m) = &self.method {
            cfg.methods = vec![m.parse::<Method>()?];
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(d) = &self.data {
            cfg.data_dir = d.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    let (common, stages, save) = match &cli.command {
        Command::GenData(c) => {
            let cfg = c.resolve()?;
            with_jobs(cfg.jobs, || generate_dataset(&cfg))??;
            return Ok(());
        }
        Command::Denoise(c) => (c, Stages { psnr: false, classify: false }, true),
        Command::Psnr(c) => (c, Stages { psnr: true, classify: false }, false),
        Command::Classify(c) => (c, Stages { psnr: false, classify: true }, false),
        Command::Bench(c) => (c, Stages::ALL, false),
    };
    let cfg = common.resolve()?;
    let save = save || cfg.save_images;
    let report = with_jobs(cfg.jobs, || run_stages(&cfg, stages, save))??;
    for path in report.write(&cfg.out_dir)? {
        eprintln!("wrote {}", path.display());
    }
    if !report.psnr.is_empty() {
        println!("{}", report.psnr_table());
    }
    if !report.classification.is_empty() {
        println!("{}", report.classification_table());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
