//! Score-level fusion.

use crate::scalar::Scalar;
use crate::tensor::ShapeError;

/// Per-class arithmetic mean of two heads' scores.
pub fn late_fuse<T: Scalar>(score_v: &[T], score_e: &[T]) -> Result<Vec<T>, ShapeError> {
    if score_v.len() != score_e.len() {
        return Err(ShapeError::new("late_fuse", format!("{} vs {} scores", score_v.len(), score_e.len())));
    }
    let two = T::of(2.0);
    Ok(score_v.iter().zip(score_e).map(|(&a, &b)| (a + b) / two).collect())
}
