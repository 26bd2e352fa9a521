//! Fully connected (affine) layers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::{gemm, Scalar};
use crate::tensor::{ShapeError, Tensor};

/// `W·x + b` for a vector `x` (shape `[in]`) or row-wise for a batch
/// (shape `[n, in]`). `W` is `out×in`.
pub fn fc<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    let [out_dim, in_dim] = *weight.shape() else {
        return Err(ShapeError::new("fc", format!("weight must be out×in, got {:?}", weight.shape())));
    };
    if bias.len() != out_dim {
        return Err(ShapeError::new("fc", format!("bias has {} entries, expected {out_dim}", bias.len())));
    }
    let (n, batched) = match *input.shape() {
        [d] if d == in_dim => (1, false),
        [n, d] if d == in_dim => (n, true),
        ref s => return Err(ShapeError::new("fc", format!("input {s:?} incompatible with weight {:?}", weight.shape()))),
    };
    let mut out = Vec::with_capacity(n * out_dim);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(false, true, n, out_dim, in_dim, T::one(), input.data(), weight.data(), T::one(), &mut out);
    let shape = if batched { vec![n, out_dim] } else { vec![out_dim] };
    Tensor::new(shape, out)
}

#[derive(Debug, Clone)]
pub struct FcGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn fc_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<FcGrads<T>, ShapeError> {
    let [out_dim, in_dim] = *weight.shape() else {
        return Err(ShapeError::new("fc_backward", "weight must be 2-D"));
    };
    let n = input.len() / in_dim.max(1);
    if input.len() != n * in_dim || grad_out.len() != n * out_dim {
        return Err(ShapeError::new(
            "fc_backward",
            format!("input {:?}, grad {:?}, weight {:?}", input.shape(), grad_out.shape(), weight.shape()),
        ));
    }
    let mut gw = vec![T::zero(); out_dim * in_dim];
    gemm(true, false, out_dim, in_dim, n, T::one(), grad_out.data(), input.data(), T::zero(), &mut gw);
    let mut gx = vec![T::zero(); n * in_dim];
    gemm(false, false, n, in_dim, out_dim, T::one(), grad_out.data(), weight.data(), T::zero(), &mut gx);
    let mut gb = vec![T::zero(); out_dim];
    for row in grad_out.data().chunks_exact(out_dim) {
        for (b, &g) in gb.iter_mut().zip(row) {
            *b += g;
        }
    }
    Ok(FcGrads {
        input: Tensor::new(input.shape().to_vec(), gx)?,
        weight: Tensor::new(weight.shape().to_vec(), gw)?,
        bias: Tensor::vector(gb),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { weight: Tensor::zeros(&[out_dim, in_dim]), bias: Tensor::zeros(&[out_dim]) }
    }

    /// Weights drawn from `N(0, std²)`, zero bias.
    pub fn normal<R: Rng>(in_dim: usize, out_dim: usize, std: f64, rng: &mut R) -> Self {
        let weight = Tensor::from_fn(&[out_dim, in_dim], |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z * std)
        });
        Self { weight, bias: Tensor::zeros(&[out_dim]) }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn out_dim(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
        fc(x, &self.weight, &self.bias)
    }

    /// Returns `(grad_input, grads)` where `grads` has this layer's shape.
    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Self), ShapeError> {
        let g = fc_backward(x, &self.weight, grad_out)?;
        Ok((g.input, Self { weight: g.weight, bias: g.bias }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_returns_input() {
        let w = Tensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let x = Tensor::vector(vec![0.5, -2.0, 7.0]);
        assert_eq!(fc(&x, &w, &Tensor::zeros(&[3])).unwrap(), x);
    }

    #[test]
    fn zero_weight_returns_bias() {
        let y = fc(&Tensor::vector(vec![3.0, 4.0]), &Tensor::zeros(&[2, 2]), &Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_multiply() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = fc(&Tensor::vector(vec![1.0, 1.0]), &w, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn batched_rows_are_independent() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::new(vec![2, 2], vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        let y = fc(&x, &w, &Tensor::vector(vec![0.5, 0.5])).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        assert_eq!(y.data(), &[3.5, 7.5, 2.5, 4.5]);
    }

    #[test]
    fn mismatched_dims_error() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        assert!(fc(&Tensor::vector(vec![1.0, 2.0]), &w, &Tensor::zeros(&[2])).is_err());
        assert!(fc(&Tensor::vector(vec![1.0, 2.0, 3.0]), &w, &Tensor::zeros(&[3])).is_err());
    }
}
