//! Image file formats.
//!
//! * 8-bit binary PGM (`P5`) for display images. Export rounds and clamps to
//!   `[0, 255]`.
//! * Lossless interchange: raw 32-bit little-endian floats in row-major order,
//!   with a JSON sidecar `{"width": m, "height": n}` next to it (same stem,
//!   `.json` extension).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|p| p.clamp(0.0, 255.0).round() as u8));
    out
}

pub fn write_pgm(img: &Image, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    let bad = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    if header[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (parse(header[1])?, parse(header[2])?, parse(header[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PGM is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + n {
        return Err(bad("truncated raster"));
    }
    let pixels = bytes[pos..pos + n].iter().map(|&b| f64::from(b)).collect();
    Image::new(width, height, pixels)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}

pub fn sidecar_path(raw_path: &Path) -> PathBuf {
    raw_path.with_extension("json")
}

/// Writes `<path>` (raw f32 LE) and its `.json` sidecar.
pub fn write_raw(img: &Image, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(img.pixels().len() * 4);
    for &p in img.pixels() {
        bytes.extend_from_slice(&(p as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = RawSidecar {
        width: img.width(),
        height: img.height(),
    };
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_vec(&sidecar)?).map_err(|e| Error::io(&side, e))
}

pub fn read_raw(path: &Path) -> Result<Image> {
    let side = sidecar_path(path);
    let meta: RawSidecar = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)
        .map_err(|e| Error::Format {
            path: side.clone(),
            reason: e.to_string(),
        })?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != meta.width * meta.height * 4 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!(
                "expected {} bytes for {}x{}, found {}",
                meta.width * meta.height * 4,
                meta.width,
                meta.height,
                bytes.len()
            ),
        });
    }
    let pixels = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Image::new(meta.width, meta.height, pixels)
}

/// Reads an image by extension: `.pgm` as PGM, anything else as raw float.
pub fn read_image(path: &Path) -> Result<Image> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path),
        _ => read_raw(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_of_integer_image() {
        let img = Image::from_fn(5, 3, |x, y| (x * 40 + y) as f64).unwrap();
        let back = decode_pgm(&encode_pgm(&img), Path::new("mem")).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pgm_export_clamps() {
        let img = Image::new(3, 1, vec![-20.0, 100.4, 300.0]).unwrap();
        let bytes = encode_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 100, 255]);
    }

    #[test]
    fn pgm_header_comments() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([7u8, 9]);
        let img = decode_pgm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(img.pixels(), &[7.0, 9.0]);
    }

    #[test]
    fn raw_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.f32");
        let img = Image::from_fn(4, 3, |x, y| x as f64 * 0.25 - y as f64 * 1000.5).unwrap();
        write_raw(&img, &path).unwrap();
        let side: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("img.json")).unwrap()).unwrap();
        assert_eq!(side, serde_json::json!({"width": 4, "height": 3}));
        assert_eq!(read_raw(&path).unwrap(), img);
    }

    #[test]
    fn raw_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.f32");
        let img = Image::filled(2, 2, 1.0).unwrap();
        write_raw(&img, &path).unwrap();
        std::fs::write(&path, [0u8; 12]).unwrap();
        assert!(matches!(read_raw(&path), Err(Error::Format { .. })));
    }
}
