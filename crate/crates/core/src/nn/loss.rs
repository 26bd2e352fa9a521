//! Softmax, sigmoid and the two training losses.

use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.iter().map(|&s| (s - m).exp()).collect();
    let z: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Vector-Jacobian product of softmax given its output `y`.
pub fn softmax_backward<T: Scalar>(y: &[T], grad_y: &[T]) -> Vec<T> {
    let inner: T = y.iter().zip(grad_y).map(|(&a, &b)| a * b).sum();
    y.iter().zip(grad_y).map(|(&a, &g)| a * (g - inner)).collect()
}

/// Softmax applied independently to each row of a 2-D tensor.
pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let cols = x.shape().last().copied().unwrap_or(0);
    let data = x.data().chunks_exact(cols.max(1)).flat_map(softmax).collect();
    Tensor::new(x.shape().to_vec(), data).expect("softmax_rows keeps shape")
}

pub fn softmax_rows_backward<T: Scalar>(y: &Tensor<T>, grad_y: &Tensor<T>) -> Tensor<T> {
    let cols = y.shape().last().copied().unwrap_or(0).max(1);
    let data = y
        .data()
        .chunks_exact(cols)
        .zip(grad_y.data().chunks_exact(cols))
        .flat_map(|(a, g)| softmax_backward(a, g))
        .collect();
    Tensor::new(y.shape().to_vec(), data).expect("softmax_rows_backward keeps shape")
}

fn log_softmax_at<T: Scalar>(scores: &[T], index: usize) -> T {
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + scores.iter().map(|&s| (s - m).exp()).sum::<T>().ln();
    scores[index] - lse
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Two-way cross-entropy on `[negative, positive]` logits.
/// `label` is `true` for the positive class. Returns `(loss, d loss / d logits)`.
pub fn bce_loss<T: Scalar>(logits: [T; 2], label: bool) -> (T, [T; 2]) {
    let target = usize::from(label);
    let loss = -log_softmax_at(&logits, target);
    let p = softmax(&logits);
    let mut grad = [p[0], p[1]];
    grad[target] -= T::one();
    (loss, grad)
}

/// Summed [`bce_loss`] over an `n×2` logit batch. Returns the total loss and
/// its gradient with respect to every logit.
pub fn bce_loss_batch<T: Scalar>(logits: &Tensor<T>, labels: &[bool]) -> Result<(T, Tensor<T>), ShapeError> {
    if logits.shape() != [labels.len(), 2] {
        return Err(ShapeError::new(
            "bce_loss_batch",
            format!("logits {:?} for {} labels", logits.shape(), labels.len()),
        ));
    }
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &label) in logits.data().chunks_exact(2).zip(labels) {
        let (l, g) = bce_loss([row[0], row[1]], label);
        total += l;
        grad.extend_from_slice(&g);
    }
    Ok((total, Tensor::new(vec![labels.len(), 2], grad)?))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("domain index {index} out of range for {domains} domains")]
pub struct DomainIndexError {
    pub index: usize,
    pub domains: usize,
}

/// Cross-domain softmax loss on positive-class scores:
/// `-log softmax(scores)[domain]`. Returns the loss and its gradient.
pub fn instance_embedding_loss<T: Scalar>(scores: &[T], domain: usize) -> Result<(T, Vec<T>), DomainIndexError> {
    if domain >= scores.len() {
        return Err(DomainIndexError { index: domain, domains: scores.len() });
    }
    let loss = -log_softmax_at(scores, domain);
    let mut grad = softmax(scores);
    grad[domain] -= T::one();
    Ok((loss, grad))
}
