//! Momentum SGD and the parameter-container trait it operates on.

use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

/// A container of named trainable tensors. Gradient containers use the same
/// type, so parameters and gradients pair up by position.
pub trait Parameterized<T: Scalar> {
    fn params(&self) -> Vec<(String, &Tensor<T>)>;
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.data_mut().fill(T::zero());
        }
        z
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// One momentum-SGD update: `v ← μv − lr·(g + wd·p); p ← p + v`.
pub fn sgd_step<T: Scalar>(
    params: &mut Tensor<T>,
    grads: &Tensor<T>,
    velocity: &mut Tensor<T>,
    cfg: &SgdConfig,
) -> Result<(), ShapeError> {
    params.check_same(grads, "sgd_step")?;
    params.check_same(velocity, "sgd_step")?;
    let (lr, mu, wd) = (T::of(cfg.lr), T::of(cfg.momentum), T::of(cfg.weight_decay));
    for ((p, &g), v) in params.data_mut().iter_mut().zip(grads.data()).zip(velocity.data_mut()) {
        *v = mu * *v - lr * (g + wd * *p);
        *p += *v;
    }
    Ok(())
}

/// Momentum state for one parameter container.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub config: SgdConfig,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new<M: Parameterized<T>>(model: &M, config: SgdConfig) -> Self {
        let velocity = model.params().iter().map(|(_, t)| Tensor::zeros_like(t)).collect();
        Self { config, velocity }
    }

    /// Applies one step. `lr_scale` multiplies the learning rate per
    /// parameter index (missing entries default to 1).
    pub fn step<M: Parameterized<T>>(&mut self, model: &mut M, grads: &M, lr_scale: &[f64]) -> Result<(), ShapeError> {
        let grads = grads.params();
        let params = model.params_mut();
        if params.len() != grads.len() || params.len() != self.velocity.len() {
            return Err(ShapeError::new("Sgd::step", "parameter count changed"));
        }
        for (i, ((p, (_, g)), v)) in params.into_iter().zip(grads).zip(&mut self.velocity).enumerate() {
            let mut cfg = self.config;
            cfg.lr *= lr_scale.get(i).copied().unwrap_or(1.0);
            sgd_step(p, g, v, &cfg)?;
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [&mut Tensor<T>], max_norm: f64) -> f64 {
    let sq: f64 = grads.iter().flat_map(|t| t.data().iter()).map(|v| v.f64() * v.f64()).sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = T::of(max_norm / norm);
        for t in grads.iter_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}
