//! Patch extraction and overlap-averaging reassembly.
//!
//! A patch of `patch_width x patch_height` pixels is vectorized column-major:
//! entry `(dx, dy)` of the patch lands at row `dy + dx * patch_height`. This
//! ordering is global; filter banks and dictionaries use the same layout.
//!
//! Anchors along each axis are `0, stride, 2*stride, ...` up to
//! `extent - patch`, plus a final anchor at `extent - patch` when the stride
//! does not land on it, so every pixel is covered whenever `stride <= patch`.
//! Anchors are traversed row-major (all x anchors of the first y anchor
//! first).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::{common_dims, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGeometry {
    pub image_width: usize,
    pub image_height: usize,
    pub patch_width: usize,
    pub patch_height: usize,
    pub stride: usize,
}

fn axis_anchors(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = extent - patch;
    let mut anchors: Vec<usize> = (0..=last).step_by(stride).collect();
    if *anchors.last().unwrap() != last {
        anchors.push(last);
    }
    anchors
}

impl PatchGeometry {
    pub fn new(
        (image_width, image_height): (usize, usize),
        patch_width: usize,
        patch_height: usize,
        stride: usize,
    ) -> Result<Self> {
        if patch_width == 0 || patch_height == 0 {
            return Err(Error::InvalidGeometry("patch dimensions must be positive".into()));
        }
        if patch_width > image_width || patch_height > image_height {
            return Err(Error::InvalidGeometry(format!(
                "patch {patch_width}x{patch_height} larger than image {image_width}x{image_height}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidGeometry("stride must be at least 1".into()));
        }
        if stride > patch_width || stride > patch_height {
            return Err(Error::InvalidGeometry(format!(
                "stride {stride} exceeds patch size {patch_width}x{patch_height}; some pixels would be uncovered"
            )));
        }
        Ok(Self {
            image_width,
            image_height,
            patch_width,
            patch_height,
            stride,
        })
    }

    #[inline]
    pub fn patch_dim(&self) -> usize {
        self.patch_width * self.patch_height
    }

    pub fn x_anchors(&self) -> Vec<usize> {
        axis_anchors(self.image_width, self.patch_width, self.stride)
    }

    pub fn y_anchors(&self) -> Vec<usize> {
        axis_anchors(self.image_height, self.patch_height, self.stride)
    }

    /// Top-left corners `(x, y)` in extraction order.
    pub fn anchors(&self) -> Vec<(usize, usize)> {
        let xs = self.x_anchors();
        self.y_anchors()
            .into_iter()
            .flat_map(|y| xs.iter().map(move |&x| (x, y)))
            .collect()
    }

    pub fn patches_per_image(&self) -> usize {
        self.x_anchors().len() * self.y_anchors().len()
    }

    /// Number of patches covering each pixel, row-major.
    pub fn coverage(&self) -> Vec<u32> {
        let mut count = vec![0u32; self.image_width * self.image_height];
        for (ax, ay) in self.anchors() {
            for dy in 0..self.patch_height {
                let row = (ay + dy) * self.image_width + ax;
                for c in &mut count[row..row + self.patch_width] {
                    *c += 1;
                }
            }
        }
        count
    }
}

/// Column-stacked vectorized patches from one or more equally sized images.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    geometry: PatchGeometry,
    source_count: usize,
    data: DMatrix<f64>,
}

impl PatchMatrix {
    /// Wraps a `patch_dim x (source_count * patches_per_image)` matrix.
    pub fn from_matrix(geometry: PatchGeometry, source_count: usize, data: DMatrix<f64>) -> Result<Self> {
        let expected = (geometry.patch_dim(), source_count * geometry.patches_per_image());
        if data.shape() != expected {
            return Err(Error::mismatch(
                format!("{}x{} patch matrix", expected.0, expected.1),
                format!("{}x{}", data.nrows(), data.ncols()),
            ));
        }
        Ok(Self {
            geometry,
            source_count,
            data,
        })
    }

    #[inline]
    pub fn geometry(&self) -> &PatchGeometry {
        &self.geometry
    }

    #[inline]
    pub fn source_count(&self) -> usize {
        self.source_count
    }

    #[inline]
    pub fn patch_dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    #[inline]
    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Replaces the patch data, keeping the geometry.
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(self.geometry, self.source_count, data)
    }

    /// Range of columns belonging to source image `index`.
    pub fn columns_of(&self, index: usize) -> std::ops::Range<usize> {
        let per = self.geometry.patches_per_image();
        index * per..(index + 1) * per
    }
}

pub fn extract_patches(
    images: &[Image],
    patch_width: usize,
    patch_height: usize,
    stride: usize,
) -> Result<PatchMatrix> {
    let dims = common_dims(images)?;
    let geometry = PatchGeometry::new(dims, patch_width, patch_height, stride)?;
    let anchors = geometry.anchors();
    let dim = geometry.patch_dim();
    let mut data = DMatrix::<f64>::zeros(dim, anchors.len() * images.len());
    let width = geometry.image_width;
    let mut col = 0;
    for img in images {
        let px = img.pixels();
        for &(ax, ay) in &anchors {
            let mut column = data.column_mut(col);
            for dx in 0..patch_width {
                for dy in 0..patch_height {
                    column[dy + dx * patch_height] = px[(ay + dy) * width + ax + dx];
                }
            }
            col += 1;
        }
    }
    PatchMatrix::from_matrix(geometry, images.len(), data)
}

/// Rebuilds source image `image_index` by averaging all patch entries that
/// cover each pixel.
pub fn assemble_patches(
    patches: &PatchMatrix,
    target_dims: (usize, usize),
    image_index: usize,
) -> Result<Image> {
    let g = patches.geometry;
    if target_dims != (g.image_width, g.image_height) {
        return Err(Error::mismatch(
            format!("{}x{}", g.image_width, g.image_height),
            format!("{}x{}", target_dims.0, target_dims.1),
        ));
    }
    if image_index >= patches.source_count {
        return Err(Error::InvalidParameter(format!(
            "image index {image_index} out of range for {} sources",
            patches.source_count
        )));
    }
    let width = g.image_width;
    let mut sum = vec![0.0f64; width * g.image_height];
    let cols = patches.columns_of(image_index);
    for ((ax, ay), col) in g.anchors().into_iter().zip(cols) {
        let column = patches.data.column(col);
        for dx in 0..g.patch_width {
            for dy in 0..g.patch_height {
                sum[(ay + dy) * width + ax + dx] += column[dy + dx * g.patch_height];
            }
        }
    }
    let coverage = g.coverage();
    for (s, &c) in sum.iter_mut().zip(&coverage) {
        debug_assert!(c > 0);
        *s /= f64::from(c);
    }
    Image::new(width, g.image_height, sum)
}
