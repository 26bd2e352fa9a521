//! Candidate box generation and labelling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TrackerError;
use crate::bbox::BBox;

/// Image extent in pixels, `(width, height)`.
pub type ImageSize = (f64, f64);

fn check_image(image: ImageSize) -> Result<(), TrackerError> {
    if image.0 >= 1.0 && image.1 >= 1.0 && image.0.is_finite() && image.1.is_finite() {
        Ok(())
    } else {
        Err(TrackerError::ImageSize { width: image.0, height: image.1 })
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Boxes around `prev` with centre offsets `N(0, (trans_sigma·sqrt(w·h))²)`
/// and a common log-scale offset `N(0, scale_sigma²)`, clipped to the image.
pub fn sample_proposals<R: Rng>(
    prev: &BBox,
    n: usize,
    trans_sigma: f64,
    scale_sigma: f64,
    image: ImageSize,
    rng: &mut R,
) -> Result<Vec<BBox>, TrackerError> {
    check_image(image)?;
    if !prev.is_valid() {
        return Err(TrackerError::InvalidBox(*prev));
    }
    let (cx, cy) = prev.center();
    let spread = trans_sigma * (prev.w * prev.h).sqrt();
    Ok((0..n)
        .map(|_| {
            let dx = normal(rng) * spread;
            let dy = normal(rng) * spread;
            let s = (normal(rng) * scale_sigma).exp();
            BBox::from_center(cx + dx, cy + dy, prev.w * s, prev.h * s).clip_to(image.0, image.1, 1.0)
        })
        .collect())
}

/// Centre shifted uniformly by up to `trans_range·sqrt(w·h)` per axis and
/// log-scale by up to `scale_range`.
pub fn sample_uniform<R: Rng>(
    around: &BBox,
    n: usize,
    trans_range: f64,
    scale_range: f64,
    image: ImageSize,
    rng: &mut R,
) -> Vec<BBox> {
    let (cx, cy) = around.center();
    let r = trans_range * (around.w * around.h).sqrt();
    (0..n)
        .map(|_| {
            let dx = rng.random_range(-1.0..=1.0) * r;
            let dy = rng.random_range(-1.0..=1.0) * r;
            let s = (rng.random_range(-1.0..=1.0) * scale_range).exp();
            BBox::from_center(cx + dx, cy + dy, around.w * s, around.h * s).clip_to(image.0, image.1, 1.0)
        })
        .collect()
}

/// Boxes of the same aspect as `like`, scaled by `[0.5, 2]`, placed anywhere
/// in the image.
pub fn sample_whole<R: Rng>(like: &BBox, n: usize, image: ImageSize, rng: &mut R) -> Vec<BBox> {
    (0..n)
        .map(|_| {
            let s = rng.random_range(0.5f64.ln()..=2f64.ln()).exp();
            let (w, h) = ((like.w * s).min(image.0), (like.h * s).min(image.1));
            let x = rng.random_range(0.0..=image.0 - w);
            let y = rng.random_range(0.0..=image.1 - h);
            BBox::new(x, y, w, h).clip_to(image.0, image.1, 1.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
    Discard,
}

/// `IoU ≥ pos_iou` positive, `IoU ≤ neg_iou` negative, otherwise discarded.
pub fn label_samples(boxes: &[BBox], gt: &BBox, pos_iou: f64, neg_iou: f64) -> Vec<SampleLabel> {
    boxes
        .iter()
        .map(|b| {
            let iou = b.iou(gt);
            if iou >= pos_iou {
                SampleLabel::Positive
            } else if iou <= neg_iou {
                SampleLabel::Negative
            } else {
                SampleLabel::Discard
            }
        })
        .collect()
}

/// How candidates for one sample set are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSource {
    Gaussian { trans_sigma: f64, scale_sigma: f64 },
    Uniform { trans_range: f64, scale_range: f64 },
    Whole,
}

/// Draws candidates in rounds of `n` until `n` carry `want`, giving up after
/// `oversample·n` draws.
#[allow(clippy::too_many_arguments)]
pub fn collect_samples<R: Rng>(
    source: SampleSource,
    want: SampleLabel,
    n: usize,
    target: &BBox,
    pos_iou: f64,
    neg_iou: f64,
    oversample: usize,
    image: ImageSize,
    rng: &mut R,
) -> Result<Vec<BBox>, TrackerError> {
    check_image(image)?;
    let mut out = Vec::with_capacity(n);
    let mut drawn = 0;
    while out.len() < n {
        if drawn >= oversample.saturating_mul(n) {
            return Err(TrackerError::InsufficientSamples { label: want, wanted: n, got: out.len() });
        }
        let batch = match source {
            SampleSource::Gaussian { trans_sigma, scale_sigma } => {
                sample_proposals(target, n, trans_sigma, scale_sigma, image, rng)?
            }
            SampleSource::Uniform { trans_range, scale_range } => {
                sample_uniform(target, n, trans_range, scale_range, image, rng)
            }
            SampleSource::Whole => sample_whole(target, n, image, rng),
        };
        drawn += n;
        let labels = label_samples(&batch, target, pos_iou, neg_iou);
        out.extend(batch.into_iter().zip(labels).filter(|(_, l)| *l == want).map(|(b, _)| b).take(n - out.len()));
    }
    Ok(out)
}

/// Indices of the `k` largest scores, highest first; ties go to the lower index.
pub fn top_k_indices<S: PartialOrd + Copy>(scores: &[S], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}
