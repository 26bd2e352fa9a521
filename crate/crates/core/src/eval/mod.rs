//! Precision and success metrics over box trajectories.
//!
//! Frames whose ground truth is absent are skipped. A missing prediction on
//! a frame with ground truth counts as a miss at every threshold.

mod dataset;

pub use dataset::{
    evaluate_dataset, parse_attributes, parse_box_file, write_curve_csv, write_report_files, AggregateScore, Report,
    SequenceScore,
};

use crate::bbox::BBox;

/// One entry per frame; `None` marks an absent box.
pub type Trajectory = Vec<Option<BBox>>;

pub const PRECISION_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("trajectory lengths differ: {pred} predicted vs {gt} ground truth")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Pointwise mean of curves sharing thresholds.
    pub fn average(curves: &[&Curve]) -> Option<Curve> {
        let first = curves.first()?;
        let n = curves.len() as f64;
        let values = (0..first.values.len())
            .map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n)
            .collect();
        Some(Curve { thresholds: first.thresholds.clone(), values })
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

pub fn center_error(a: &BBox, b: &BBox) -> f64 {
    a.center_distance(b)
}

/// `0, 1, …, 50` pixels.
pub fn precision_thresholds() -> Vec<f64> {
    (0..=50).map(f64::from).collect()
}

/// `0, 0.05, …, 1`.
pub fn success_thresholds() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

/// Per evaluated frame, `f(pred, gt)` or `None` for a missing prediction.
fn per_frame<F: Fn(&BBox, &BBox) -> f64>(pred: &[Option<BBox>], gt: &[Option<BBox>], f: F) -> Result<Vec<Option<f64>>, EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gt: gt.len() });
    }
    Ok(pred
        .iter()
        .zip(gt)
        .filter_map(|(p, g)| g.as_ref().map(|g| p.as_ref().map(|p| f(p, g))))
        .collect())
}

fn fraction(values: &[Option<f64>], pass: impl Fn(f64) -> bool) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|v| v.is_some_and(&pass)).count() as f64 / values.len() as f64
}

/// Fraction of frames with centre error `≤ τ`, and the value at 20 px.
pub fn precision_curve(pred: &[Option<BBox>], gt: &[Option<BBox>]) -> Result<(Curve, f64), EvalError> {
    let errs = per_frame(pred, gt, center_error)?;
    let thresholds = precision_thresholds();
    let values: Vec<f64> = thresholds.iter().map(|&t| fraction(&errs, |e| e <= t)).collect();
    let p20 = values[PRECISION_THRESHOLD as usize];
    Ok((Curve { thresholds, values }, p20))
}

/// Fraction of frames with IoU strictly above each threshold, and the
/// mean over the 21 thresholds.
pub fn success_curve(pred: &[Option<BBox>], gt: &[Option<BBox>]) -> Result<(Curve, f64), EvalError> {
    let ious = per_frame(pred, gt, iou)?;
    let thresholds = success_thresholds();
    let values: Vec<f64> = thresholds.iter().map(|&t| fraction(&ious, |v| v > t)).collect();
    let curve = Curve { thresholds, values };
    let auc = curve.mean();
    Ok((curve, auc))
}

/// Mean IoU over frames with ground truth (missing predictions count as 0).
pub fn mean_iou(pred: &[Option<BBox>], gt: &[Option<BBox>]) -> Result<f64, EvalError> {
    let ious = per_frame(pred, gt, iou)?;
    if ious.is_empty() {
        return Ok(0.0);
    }
    Ok(ious.iter().map(|v| v.unwrap_or(0.0)).sum::<f64>() / ious.len() as f64)
}
