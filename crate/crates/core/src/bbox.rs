//! Axis-aligned boxes in pixel coordinates.

/// `(x, y)` is the top-left corner; `w`, `h` are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { x: cx - w / 2.0, y: cy - h / 2.0, w, h }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.right().min(other.right()) - self.x.max(other.x)).max(0.0);
        let ih = (self.bottom().min(other.bottom()) - self.y.max(other.y)).max(0.0);
        iw * ih
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Euclidean distance between centres.
    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (ax, ay) = self.center();
        let (bx, by) = other.center();
        (ax - bx).hypot(ay - by)
    }

    /// Shrink to at most the image size (at least `min_size`) and shift the
    /// box so it lies inside `[0, width] × [0, height]`.
    pub fn clip_to(&self, width: f64, height: f64, min_size: f64) -> BBox {
        let w = self.w.min(width).max(min_size.min(width));
        let h = self.h.min(height).max(min_size.min(height));
        let (cx, cy) = self.center();
        let x = (cx - w / 2.0).clamp(0.0, width - w);
        let y = (cy - h / 2.0).clamp(0.0, height - h);
        BBox { x, y, w, h }
    }

    pub fn is_inside(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width + 1e-9 && self.bottom() <= height + 1e-9
    }

    /// Component-wise mean of a non-empty set of boxes.
    pub fn mean(boxes: &[BBox]) -> Option<BBox> {
        if boxes.is_empty() {
            return None;
        }
        let n = boxes.len() as f64;
        let s = boxes.iter().fold([0.0; 4], |a, b| [a[0] + b.x, a[1] + b.y, a[2] + b.w, a[3] + b.h]);
        Some(BBox::new(s[0] / n, s[1] / n, s[2] / n, s[3] / n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BBox::new(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((a.iou(&BBox::new(1.0, 1.0, 2.0, 2.0)) - 1.0 / 7.0).abs() < 1e-15);
        // touching edges share no area
        assert_eq!(a.iou(&BBox::new(2.0, 0.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn center_distance_examples() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(a.center_distance(&a), 0.0);
        assert_eq!(a.center_distance(&BBox::new(3.0, 4.0, 10.0, 10.0)), 5.0);
        assert_eq!(a.center_distance(&BBox::new(10.0, 0.0, 10.0, 10.0)), 10.0);
    }

    #[test]
    fn clipping_keeps_box_inside() {
        let b = BBox::new(-5.0, 90.0, 20.0, 20.0).clip_to(100.0, 100.0, 1.0);
        assert_eq!(b, BBox::new(0.0, 80.0, 20.0, 20.0));
        let big = BBox::new(-50.0, -50.0, 300.0, 10.0).clip_to(100.0, 100.0, 1.0);
        assert_eq!(big.w, 100.0);
        assert!(big.is_inside(100.0, 100.0));
    }
}
