use crate::image::Image;

/// Rotates counter-clockwise by `degrees` about the image center (y axis
/// pointing up) with bilinear interpolation; samples outside the input are
/// zero.
pub fn rotate_bilinear(img: &Image, degrees: f64) -> Image {
    if degrees.rem_euclid(360.0) == 0.0 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    let sample = |x: f64, y: f64| -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let px = |xi: isize, yi: isize| -> f64 {
            if xi < 0 || yi < 0 || xi >= w as isize || yi >= h as isize {
                0.0
            } else {
                img.get(xi as usize, yi as usize)
            }
        };
        let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
        let bottom = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    };
    Image::from_fn(w, h, |x, y| {
        // output point in the y-up frame, rotated back by -degrees
        let (dx, dy) = (x as f64 - cx, cy - y as f64);
        let sx = dx * c + dy * s;
        let sy = -dx * s + dy * c;
        sample(cx + sx, cy - sy)
    })
    .expect("rotation preserves dimensions")
}

/// Mirror about the vertical axis (`x -> width - 1 - x`).
pub fn reflect_horizontal(img: &Image) -> Image {
    let w = img.width();
    Image::from_fn(w, img.height(), |x, y| img.get(w - 1 - x, y)).expect("same dimensions")
}
