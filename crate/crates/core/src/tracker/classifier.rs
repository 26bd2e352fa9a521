//! Three fully connected layers scoring a fused feature as
//! `[negative, positive]` logits.

use rand::Rng;

use crate::nn::linear::Linear;
use crate::nn::optim::Parameterized;
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<T> {
    pub fc4: Linear<T>,
    pub fc5: Linear<T>,
    pub fc6: Linear<T>,
}

#[derive(Debug, Clone)]
pub struct ClassifierCache<T> {
    x: Tensor<T>,
    h4_pre: Tensor<T>,
    h4: Tensor<T>,
    h5_pre: Tensor<T>,
    h5: Tensor<T>,
}

fn relu<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    t.map(|v| v.max(T::zero()))
}

fn relu_grad<T: Scalar>(pre: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    pre.zip_map(g, |x, g| if x > T::zero() { g } else { T::zero() })
}

impl<T: Scalar> Classifier<T> {
    /// He-normal hidden layers, `N(0, 0.01²)` output layer, zero biases.
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fc4: Linear::normal(input, hidden, (2.0 / input as f64).sqrt(), rng),
            fc5: Linear::normal(hidden, hidden, (2.0 / hidden as f64).sqrt(), rng),
            fc6: Linear::normal(hidden, 2, 0.01, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.fc4.in_dim()
    }

    /// `B×D` features to `B×2` logits.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ClassifierCache<T>), ShapeError> {
        let h4_pre = self.fc4.forward(x)?;
        let h4 = relu(&h4_pre);
        let h5_pre = self.fc5.forward(&h4)?;
        let h5 = relu(&h5_pre);
        let out = self.fc6.forward(&h5)?;
        Ok((out, ClassifierCache { x: x.clone(), h4_pre, h4, h5_pre, h5 }))
    }

    /// Returns `(d loss / d x, parameter gradients)`.
    pub fn backward(&self, cache: &ClassifierCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, Self), ShapeError> {
        let (g5, fc6) = self.fc6.backward(&cache.h5, grad_out)?;
        let (g4, fc5) = self.fc5.backward(&cache.h4, &relu_grad(&cache.h5_pre, &g5)?)?;
        let (gx, fc4) = self.fc4.backward(&cache.x, &relu_grad(&cache.h4_pre, &g4)?)?;
        Ok((gx, Self { fc4, fc5, fc6 }))
    }
}

impl<T: Scalar> Parameterized<T> for Classifier<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        vec![
            ("fc4.weight".into(), &self.fc4.weight),
            ("fc4.bias".into(), &self.fc4.bias),
            ("fc5.weight".into(), &self.fc5.weight),
            ("fc5.bias".into(), &self.fc5.bias),
            ("fc6.weight".into(), &self.fc6.weight),
            ("fc6.bias".into(), &self.fc6.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![
            &mut self.fc4.weight,
            &mut self.fc4.bias,
            &mut self.fc5.weight,
            &mut self.fc5.bias,
            &mut self.fc6.weight,
            &mut self.fc6.bias,
        ]
    }
}
