use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ddtf_core::classify::ClassificationReport;
use ddtf_core::datagen::snr_label;
use serde::Serialize;

use crate::error::BenchError;

/// Column label for the undenoised input.
pub const NOISY: &str = "noisy";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImagePsnr {
    pub snr: f64,
    pub method: String,
    pub image_id: String,
    pub psnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsnrStat {
    pub method: String,
    pub images: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl PsnrStat {
    pub fn from_values(method: &str, values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            method: method.to_string(),
            images: n,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsnrRow {
    pub snr: f64,
    pub methods: Vec<PsnrStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStat {
    pub method: String,
    pub errors: usize,
    pub images: usize,
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRow {
    pub snr: f64,
    pub methods: Vec<ErrorStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationDetail {
    pub snr: f64,
    pub method: String,
    pub report: ClassificationReport,
}

/// Everything a benchmark run measured, in deterministic order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub per_image_psnr: Vec<ImagePsnr>,
    pub psnr: Vec<PsnrRow>,
    pub classification: Vec<ClassificationRow>,
    pub details: Vec<ClassificationDetail>,
}

impl BenchReport {
    pub fn psnr_stat(&self, snr: f64, method: &str) -> Option<&PsnrStat> {
        self.psnr
            .iter()
            .find(|r| snr_label(r.snr) == snr_label(snr))?
            .methods
            .iter()
            .find(|m| m.method == method)
    }

    pub fn error_stat(&self, snr: f64, method: &str) -> Option<&ErrorStat> {
        self.classification
            .iter()
            .find(|r| snr_label(r.snr) == snr_label(snr))?
            .methods
            .iter()
            .find(|m| m.method == method)
    }

    pub fn psnr_table(&self) -> String {
        let rows: Vec<(String, Vec<String>)> = self
            .psnr
            .iter()
            .map(|r| {
                let cells = r.methods.iter().map(|m| format!("{:.4} ± {:.2}", m.mean, m.std)).collect();
                (snr_label(r.snr), cells)
            })
            .collect();
        let header = self.psnr.first().map(|r| r.methods.iter().map(|m| m.method.clone()).collect());
        render_table("PSNR (dB)", header.unwrap_or_default(), &rows)
    }

    pub fn classification_table(&self) -> String {
        let rows: Vec<(String, Vec<String>)> = self
            .classification
            .iter()
            .map(|r| {
                let cells = r.methods.iter().map(|m| format!("{:.2}", 100.0 * m.error_rate)).collect();
                (snr_label(r.snr), cells)
            })
            .collect();
        let header = self
            .classification
            .first()
            .map(|r| r.methods.iter().map(|m| m.method.clone()).collect());
        render_table("Classification error rate (%)", header.unwrap_or_default(), &rows)
    }

    fn psnr_csv(&self) -> String {
        let mut out = String::from("snr,method,images,mean_psnr,std_psnr\n");
        for r in &self.psnr {
            for m in &r.methods {
                let _ = writeln!(out, "{},{},{},{},{}", r.snr, m.method, m.images, m.mean, m.std);
            }
        }
        out
    }

    fn per_image_csv(&self) -> String {
        let mut out = String::from("snr,method,image_id,psnr\n");
        for p in &self.per_image_psnr {
            let _ = writeln!(out, "{},{},{},{}", p.snr, p.method, p.image_id, p.psnr);
        }
        out
    }

    fn classification_csv(&self) -> String {
        let mut out = String::from("snr,method,errors,images,error_rate\n");
        for r in &self.classification {
            for m in &r.methods {
                let _ = writeln!(out, "{},{},{},{},{}", r.snr, m.method, m.errors, m.images, m.error_rate);
            }
        }
        out
    }

    fn classification_json(&self) -> Result<String, BenchError> {
        #[derive(Serialize)]
        struct Doc<'a> {
            error_rate: BTreeMap<&'a str, f64>,
            per_snr: &'a [ClassificationRow],
        }
        // pooled over every classified SNR level
        let mut totals: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for r in &self.classification {
            for m in &r.methods {
                let t = totals.entry(m.method.as_str()).or_default();
                t.0 += m.errors;
                t.1 += m.images;
            }
        }
        let doc = Doc {
            error_rate: totals.into_iter().map(|(k, (e, n))| (k, e as f64 / n as f64)).collect(),
            per_snr: &self.classification,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Writes the report files into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
        let mut files: Vec<(PathBuf, String)> = Vec::new();
        if !self.psnr.is_empty() {
            #[derive(Serialize)]
            struct Doc<'a> {
                per_snr: &'a [PsnrRow],
            }
            files.push((dir.join("psnr.csv"), self.psnr_csv()));
            files.push((dir.join("psnr_per_image.csv"), self.per_image_csv()));
            files.push((
                dir.join("psnr.json"),
                serde_json::to_string_pretty(&Doc { per_snr: &self.psnr })? + "\n",
            ));
        }
        if !self.classification.is_empty() {
            files.push((dir.join("classification.csv"), self.classification_csv()));
            files.push((dir.join("classification.json"), self.classification_json()?));
            for d in &self.details {
                let name = format!("classification_{}_snr_{}.csv", d.method, snr_label(d.snr));
                files.push((dir.join(name), d.report.to_csv()));
            }
        }
        let mut tables = String::new();
        if !self.psnr.is_empty() {
            tables.push_str(&self.psnr_table());
        }
        if !self.classification.is_empty() {
            if !tables.is_empty() {
                tables.push('\n');
            }
            tables.push_str(&self.classification_table());
        }
        files.push((dir.join("tables.txt"), tables));
        for (path, text) in &files {
            fs::write(path, text).map_err(|e| BenchError::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

fn render_table(title: &str, header: Vec<String>, rows: &[(String, Vec<String>)]) -> String {
    let mut widths: Vec<usize> = std::iter::once("SNR".len())
        .chain(header.iter().map(|h| h.chars().count()))
        .collect();
    for (snr, cells) in rows {
        widths[0] = widths[0].max(snr.chars().count());
        for (i, c) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(c.chars().count());
        }
    }
    let line = |first: &str, rest: &[String]| -> String {
        let mut s = format!("{first:<w$}", w = widths[0]);
        for (i, c) in rest.iter().enumerate() {
            let _ = write!(s, "  {c:>w$}", w = widths[i + 1]);
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = format!("{title}\n");
    out.push_str(&line("SNR", &header));
    for (snr, cells) in rows {
        out.push_str(&line(snr, cells));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let s = PsnrStat::from_values("x", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(PsnrStat::from_values("x", &[7.0]).std, 0.0);
    }

    #[test]
    fn table_layout() {
        let report = BenchReport {
            psnr: vec![PsnrRow {
                snr: 0.8,
                methods: vec![PsnrStat::from_values(NOISY, &[7.0, 9.0]), PsnrStat::from_values("ddtf", &[45.2005])],
            }],
            ..Default::default()
        };
        let t = report.psnr_table();
        assert_eq!(t, "PSNR (dB)\nSNR          noisy            ddtf\n0.8  8.0000 ± 1.41  45.2005 ± 0.00\n");
        assert_eq!(report.psnr_stat(0.8, "ddtf").unwrap().images, 1);
        assert!(report.psnr_stat(0.4, "ddtf").is_none());
    }
}
