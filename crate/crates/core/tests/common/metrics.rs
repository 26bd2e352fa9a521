//! Counting oracles for the tracking metrics on integer-aligned boxes.

use evfuse::BBox;
use rand::Rng;

/// Integer corner and size, so every pixel is either fully in or out.
#[derive(Debug, Clone, Copy)]
pub struct IntBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl IntBox {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self { x: rng.random_range(0..40), y: rng.random_range(0..40), w: rng.random_range(1..25), h: rng.random_range(1..25) }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.w as f64, self.h as f64)
    }

    fn contains(&self, px: i64, py: i64) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }
}

/// `(intersection, union)` by visiting every unit pixel of the canvas.
pub fn count_overlap(a: &IntBox, b: &IntBox) -> (i64, i64) {
    let (mut inter, mut union) = (0, 0);
    for py in -10..80 {
        for px in -10..80 {
            let (ia, ib) = (a.contains(px, py), b.contains(px, py));
            inter += i64::from(ia && ib);
            union += i64::from(ia || ib);
        }
    }
    (inter, union)
}

/// Squared centre distance times four, an integer.
pub fn center_dist2_x4(a: &IntBox, b: &IntBox) -> i64 {
    let dx = (2 * a.x + a.w) - (2 * b.x + b.w);
    let dy = (2 * a.y + a.h) - (2 * b.y + b.h);
    dx * dx + dy * dy
}

pub struct Trajectories {
    pub pred: Vec<Option<IntBox>>,
    pub gt: Vec<Option<IntBox>>,
}

impl Trajectories {
    /// Some ground-truth frames are absent and some predictions missing.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let len = rng.random_range(1..40);
        let mut pred = Vec::with_capacity(len);
        let mut gt = Vec::with_capacity(len);
        for _ in 0..len {
            let g = IntBox::random(rng);
            let p = if rng.random_bool(0.5) {
                IntBox { x: g.x + rng.random_range(-6..=6), y: g.y + rng.random_range(-6..=6), ..g }
            } else {
                IntBox::random(rng)
            };
            gt.push((!rng.random_bool(0.1)).then_some(g));
            pred.push((!rng.random_bool(0.1)).then_some(p));
        }
        Self { pred, gt }
    }

    pub fn as_boxes(&self) -> (Vec<Option<BBox>>, Vec<Option<BBox>>) {
        let conv = |v: &[Option<IntBox>]| v.iter().map(|b| b.map(|b| b.bbox())).collect();
        (conv(&self.pred), conv(&self.gt))
    }

    /// `(predicted, ground truth)` on frames that have ground truth.
    fn scored(&self) -> impl Iterator<Item = (Option<&IntBox>, &IntBox)> {
        self.pred.iter().zip(&self.gt).filter_map(|(p, g)| g.as_ref().map(|g| (p.as_ref(), g)))
    }

    /// Fraction of scored frames with centre error at most `t` pixels.
    pub fn precision_at(&self, t: i64) -> f64 {
        let (mut hit, mut total) = (0, 0);
        for (p, g) in self.scored() {
            total += 1;
            if p.is_some_and(|p| center_dist2_x4(p, g) <= 4 * t * t) {
                hit += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// Fraction of scored frames with IoU strictly above `i / 20`.
    pub fn success_at(&self, i: i64) -> f64 {
        let (mut hit, mut total) = (0, 0);
        for (p, g) in self.scored() {
            total += 1;
            if let Some(p) = p {
                let (inter, union) = count_overlap(p, g);
                if 20 * inter > i * union {
                    hit += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}
