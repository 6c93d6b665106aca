//! Two-conformation clamp phantoms.
//!
//! An annular body with an angular gap (wide for the open conformation,
//! narrow for the closed one) plus two lobes at fixed, asymmetric positions.
//! Shapes are rendered by 4x4 supersampling so edges are anti-aliased.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conformation {
    Open,
    Close,
}

impl Conformation {
    pub const ALL: [Conformation; 2] = [Conformation::Open, Conformation::Close];

    pub fn label(self) -> &'static str {
        match self {
            Conformation::Open => "open",
            Conformation::Close => "close",
        }
    }

    /// Angular width of the gap in the annulus, degrees.
    pub fn gap_degrees(self) -> f64 {
        match self {
            Conformation::Open => 110.0,
            Conformation::Close => 25.0,
        }
    }
}

impl fmt::Display for Conformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Conformation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Conformation::Open),
            "close" => Ok(Conformation::Close),
            other => Err(Error::UnknownConformation(other.to_string())),
        }
    }
}

// Geometry as fractions of the image size.
const INNER_RADIUS: f64 = 0.17;
const OUTER_RADIUS: f64 = 0.30;
const LOBE_RADIUS: f64 = 0.075;
const LOBE_DISTANCE: f64 = 0.385;
/// Lobe directions in the body frame, degrees (gap is centered at 90).
const LOBE_ANGLES: [f64; 2] = [215.0, 300.0];
const GAP_CENTER: f64 = 90.0;
const BODY_LEVEL: f64 = 220.0;
const LOBE_LEVEL: f64 = 255.0;
/// Relative radius jitter bound.
pub const RADIUS_JITTER: f64 = 0.03;
const SUPERSAMPLE: usize = 4;

/// Wraps an angle in degrees to `(-180, 180]`.
fn wrap_degrees(a: f64) -> f64 {
    let mut a = a % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Renders a phantom rotated counter-clockwise by `rotation` degrees
/// (y axis pointing up, about the image center).
pub fn make_phantom(conformation: Conformation, rotation: f64, jitter_seed: u64, size: usize) -> Result<Image> {
    if size < 8 {
        return Err(Error::InvalidParameter(format!("phantom size must be at least 8, got {size}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let scale = size as f64 * (1.0 + rng.random_range(-RADIUS_JITTER..=RADIUS_JITTER));
    let (r_in, r_out) = (INNER_RADIUS * scale, OUTER_RADIUS * scale);
    let lobe_r = LOBE_RADIUS * scale;
    let lobe_d = LOBE_DISTANCE * scale;
    let half_gap = conformation.gap_degrees() / 2.0;
    let lobes: Vec<(f64, f64)> = LOBE_ANGLES
        .iter()
        .map(|a| {
            let t = a.to_radians();
            (lobe_d * t.cos(), lobe_d * t.sin())
        })
        .collect();

    let center = (size as f64 - 1.0) / 2.0;
    let (sin_r, cos_r) = (-rotation.to_radians()).sin_cos();
    let level = |bx: f64, by: f64| -> f64 {
        if lobes
            .iter()
            .any(|&(lx, ly)| (bx - lx).powi(2) + (by - ly).powi(2) <= lobe_r * lobe_r)
        {
            return LOBE_LEVEL;
        }
        let r = bx.hypot(by);
        if r < r_in || r > r_out {
            return 0.0;
        }
        let angle = by.atan2(bx) * 180.0 / PI;
        if wrap_degrees(angle - GAP_CENTER).abs() < half_gap {
            0.0
        } else {
            BODY_LEVEL
        }
    };

    let n = SUPERSAMPLE as f64;
    Image::from_fn(size, size, |x, y| {
        let mut acc = 0.0;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let px = x as f64 + (sx as f64 + 0.5) / n - 0.5 - center;
                let py = center - (y as f64 + (sy as f64 + 0.5) / n - 0.5);
                // undo the rotation to land in the body frame
                let bx = px * cos_r - py * sin_r;
                let by = px * sin_r + py * cos_r;
                acc += level(bx, by);
            }
        }
        acc / (n * n)
    })
}
