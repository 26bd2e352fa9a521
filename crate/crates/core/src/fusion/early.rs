//! Input-level fusion of the frame and event tensors.

use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EarlyMode {
    /// Elementwise sum clamped to `[0, 1]`.
    Add,
    /// Channel stack.
    Concat,
}

impl EarlyMode {
    pub fn output_channels(&self, c: usize) -> usize {
        match self {
            EarlyMode::Add => c,
            EarlyMode::Concat => 2 * c,
        }
    }
}

pub fn early_fuse<T: Scalar>(frame: &Tensor<T>, events: &Tensor<T>, mode: EarlyMode) -> Result<Tensor<T>, ShapeError> {
    if frame.ndim() != 3 || events.ndim() != 3 || frame.shape()[1..] != events.shape()[1..] {
        return Err(ShapeError::new(
            "early_fuse",
            format!("spatial dims differ: {:?} vs {:?}", frame.shape(), events.shape()),
        ));
    }
    match mode {
        EarlyMode::Add => frame.zip_map(events, |a, b| (a + b).max(T::zero()).min(T::one())),
        EarlyMode::Concat => Tensor::concat0(&[frame, events]),
    }
}
