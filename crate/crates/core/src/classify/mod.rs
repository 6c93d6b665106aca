//! Nearest-template classification over rotated and reflected templates.

mod rotate;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::Image;

pub use rotate::{reflect_horizontal, rotate_bilinear};

/// How an expanded template was derived from its base image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Provenance {
    pub class: usize,
    pub base: usize,
    pub angle: f64,
    pub reflected: bool,
}

#[derive(Debug, Clone)]
pub struct ExpandedTemplate {
    pub provenance: Provenance,
    pub image: Image,
}

/// Base template images grouped by class.
#[derive(Debug, Clone)]
pub struct BaseTemplates {
    pub classes: Vec<String>,
    /// `(class index, image)`; base index is the position within its class.
    pub templates: Vec<(usize, Image)>,
}

/// Expanded templates in tie-break order: class, base index, angle,
/// unreflected before reflected.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    classes: Vec<String>,
    dims: (usize, usize),
    templates: Vec<ExpandedTemplate>,
}

/// Rotation angles `0, step, ..., 360 - step`.
pub fn rotation_angles(angle_step: f64) -> Result<Vec<f64>> {
    let count = 360.0 / angle_step;
    if !(angle_step > 0.0) || (count - count.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("angle step {angle_step} does not divide 360")));
    }
    Ok((0..count.round() as usize).map(|i| i as f64 * angle_step).collect())
}

pub fn expand_templates(bases: &BaseTemplates, angle_step: f64, include_reflection: bool) -> Result<TemplateBank> {
    let angles = rotation_angles(angle_step)?;
    let first = bases
        .templates
        .first()
        .ok_or_else(|| Error::EmptyInput("no base templates".into()))?;
    let dims = first.1.dims();
    for class in 0..bases.classes.len() {
        if !bases.templates.iter().any(|(c, _)| *c == class) {
            return Err(Error::EmptyInput(format!("class `{}` has no templates", bases.classes[class])));
        }
    }
    let mut ordered: Vec<(usize, usize, &Image)> = Vec::with_capacity(bases.templates.len());
    let mut seen = vec![0usize; bases.classes.len()];
    for (class, img) in &bases.templates {
        if *class >= bases.classes.len() {
            return Err(Error::InvalidParameter(format!("class index {class} out of range")));
        }
        if img.dims() != dims {
            return Err(Error::mismatch(format!("{}x{}", dims.0, dims.1), format!("{}x{}", img.width(), img.height())));
        }
        ordered.push((*class, seen[*class], img));
        seen[*class] += 1;
    }
    ordered.sort_by_key(|&(c, b, _)| (c, b));

    let reflections: &[bool] = if include_reflection { &[false, true] } else { &[false] };
    let mut variants = Vec::with_capacity(ordered.len() * angles.len() * reflections.len());
    for (i, &(_, base, _)) in ordered.iter().enumerate() {
        for &angle in &angles {
            for &reflected in reflections {
                variants.push((i, base, angle, reflected));
            }
        }
    }
    let templates = variants
        .par_iter()
        .map(|&(i, base, angle, reflected)| {
            let (class, _, img) = ordered[i];
            let source = if reflected { reflect_horizontal(img) } else { img.clone() };
            ExpandedTemplate {
                provenance: Provenance { class, base, angle, reflected },
                image: rotate_bilinear(&source, angle),
            }
        })
        .collect();
    Ok(TemplateBank {
        classes: bases.classes.clone(),
        dims,
        templates,
    })
}

impl TemplateBank {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn templates(&self) -> &[ExpandedTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemplateMatch {
    pub class: usize,
    pub distance: f64,
    pub provenance: Provenance,
}

/// Squared distance, abandoning once the partial sum reaches `bound`.
fn squared_distance_bounded(a: &[f64], b: &[f64], bound: f64) -> f64 {
    const BLOCK: usize = 512;
    let mut total = 0.0;
    for (ca, cb) in a.chunks(BLOCK).zip(b.chunks(BLOCK)) {
        let mut acc = [0.0f64; 4];
        let mut ia = ca.chunks_exact(4);
        let mut ib = cb.chunks_exact(4);
        for (x, y) in (&mut ia).zip(&mut ib) {
            for l in 0..4 {
                let d = x[l] - y[l];
                acc[l] += d * d;
            }
        }
        for (x, y) in ia.remainder().iter().zip(ib.remainder()) {
            acc[0] += (x - y) * (x - y);
        }
        total += (acc[0] + acc[1]) + (acc[2] + acc[3]);
        if total >= bound {
            return total;
        }
    }
    total
}

/// Class of the expanded template with the smallest Euclidean distance.
/// Exact ties keep the earliest template in bank order.
pub fn nearest_template(img: &Image, bank: &TemplateBank) -> Result<TemplateMatch> {
    if img.dims() != bank.dims {
        return Err(Error::mismatch(
            format!("{}x{}", bank.dims.0, bank.dims.1),
            format!("{}x{}", img.width(), img.height()),
        ));
    }
    let mut best = f64::INFINITY;
    let mut best_index = 0;
    for (i, t) in bank.templates.iter().enumerate() {
        let d = squared_distance_bounded(img.pixels(), t.image.pixels(), best);
        if d < best {
            best = d;
            best_index = i;
        }
    }
    let provenance = bank.templates[best_index].provenance;
    Ok(TemplateMatch {
        class: provenance.class,
        distance: best.sqrt(),
        provenance,
    })
}

#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: String,
    pub class: usize,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedImage {
    pub id: String,
    pub true_class: usize,
    pub predicted: TemplateMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub classes: Vec<String>,
    pub rows: Vec<ClassifiedImage>,
    pub errors: usize,
    pub error_rate: f64,
}

pub fn evaluate(images: &[LabeledImage], bank: &TemplateBank) -> Result<ClassificationReport> {
    if images.is_empty() {
        return Err(Error::EmptyInput("no images to classify".into()));
    }
    let rows = images
        .par_iter()
        .map(|li| {
            Ok(ClassifiedImage {
                id: li.id.clone(),
                true_class: li.class,
                predicted: nearest_template(&li.image, bank)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors = rows.iter().filter(|r| r.predicted.class != r.true_class).count();
    Ok(ClassificationReport {
        classes: bank.classes.clone(),
        error_rate: errors as f64 / rows.len() as f64,
        errors,
        rows,
    })
}

impl ClassificationReport {
    /// `image_id,true_label,predicted_label,distance`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,true_label,predicted_label,distance\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                r.id, self.classes[r.true_class], self.classes[r.predicted.class], r.predicted.distance
            ));
        }
        out
    }
}
