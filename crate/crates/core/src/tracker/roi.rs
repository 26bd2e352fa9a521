//! RoI align: fixed-size bilinear crops of a backbone feature map.

use super::TrackerError;
use crate::bbox::BBox;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bilinear value at continuous feature coordinates, zero beyond one cell
/// outside the map.
fn bilinear<T: Scalar>(plane: &[T], h: usize, w: usize, fy: f64, fx: f64) -> T {
    if fy < -1.0 || fy > h as f64 || fx < -1.0 || fx > w as f64 {
        return T::zero();
    }
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (ly, lx) = (T::of(fy - y0 as f64), T::of(fx - x0 as f64));
    let (hy, hx) = (T::one() - ly, T::one() - lx);
    hy * (hx * plane[y0 * w + x0] + lx * plane[y0 * w + x1]) + ly * (hx * plane[y1 * w + x0] + lx * plane[y1 * w + x1])
}

/// Samples `out×out` bins of `box` (image pixels) from a `C×H×W` map whose
/// cells are `stride` pixels apart. Cell `i` covers pixels
/// `[i·stride, (i+1)·stride)` with its value at the cell centre, so pixel
/// coordinate `x` maps to `x/stride − 0.5`. One sample per bin centre.
pub fn roi_align<T: Scalar>(map: &Tensor<T>, bbox: &BBox, stride: usize, out: usize) -> Result<Tensor<T>, TrackerError> {
    if map.ndim() != 3 || map.is_empty() || stride == 0 || out == 0 {
        return Err(TrackerError::Shape(crate::tensor::ShapeError::new(
            "roi_align",
            format!("map {:?}, stride {stride}, output {out}", map.shape()),
        )));
    }
    let (c, h, w) = (map.dim(0), map.dim(1), map.dim(2));
    let s = stride as f64;
    let extent = BBox::new(0.0, 0.0, w as f64 * s, h as f64 * s);
    if !bbox.is_valid() || bbox.intersection_area(&extent) <= 0.0 {
        return Err(TrackerError::BoxOutside(*bbox));
    }
    let bin_w = bbox.w / out as f64;
    let bin_h = bbox.h / out as f64;
    let mut data = Vec::with_capacity(c * out * out);
    for plane in map.data().chunks_exact(h * w) {
        for i in 0..out {
            let fy = (bbox.y + (i as f64 + 0.5) * bin_h) / s - 0.5;
            for j in 0..out {
                let fx = (bbox.x + (j as f64 + 0.5) * bin_w) / s - 0.5;
                data.push(bilinear(plane, h, w, fy, fx));
            }
        }
    }
    Ok(Tensor::new(vec![c, out, out], data)?)
}
