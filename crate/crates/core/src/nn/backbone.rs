//! Three-layer convolutional feature extractor shared by both modalities.
//!
//! Layout: conv1 7×7 stride 2 → ReLU → 3×3 max-pool stride 2 → conv2 5×5
//! stride 2 → ReLU → 3×3 max-pool stride 2 → conv3 3×3 stride 1 → ReLU.
//! Every layer is padded so a `H×W` input yields a `ceil(H/16)×ceil(W/16)`
//! map, i.e. a total stride of 16.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::conv::{conv2d, max_pool2d, out_dim, relu};
use super::optim::Parameterized;
use super::weights::{WeightFile, WeightFileError};
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneSpec {
    pub in_channels: usize,
    pub convs: [ConvSpec; 3],
    /// Pooling after each convolution (after its ReLU), if any.
    pub pools: [Option<PoolSpec>; 3],
}

impl BackboneSpec {
    /// 96/256/512-channel layout.
    pub fn standard(in_channels: usize) -> Self {
        Self::with_widths(in_channels, [96, 256, 512])
    }

    pub fn with_widths(in_channels: usize, widths: [usize; 3]) -> Self {
        let pool = Some(PoolSpec { kernel: 3, stride: 2, padding: 1 });
        Self {
            in_channels,
            convs: [
                ConvSpec { out_channels: widths[0], kernel: 7, stride: 2, padding: 3 },
                ConvSpec { out_channels: widths[1], kernel: 5, stride: 2, padding: 2 },
                ConvSpec { out_channels: widths[2], kernel: 3, stride: 1, padding: 1 },
            ],
            pools: [pool, pool, None],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.convs[2].out_channels
    }

    pub fn total_stride(&self) -> usize {
        self.convs
            .iter()
            .zip(&self.pools)
            .map(|(c, p)| c.stride * p.map_or(1, |p| p.stride))
            .product()
    }

    /// Output `(height, width)` for an input of the given size.
    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (mut h, mut w) = (h, w);
        for (c, p) in self.convs.iter().zip(&self.pools) {
            h = out_dim(h, c.kernel, c.stride, c.padding)?;
            w = out_dim(w, c.kernel, c.stride, c.padding)?;
            if let Some(p) = p {
                h = out_dim(h, p.kernel, p.stride, p.padding)?;
                w = out_dim(w, p.kernel, p.stride, p.padding)?;
            }
        }
        Some((h, w))
    }

    fn weight_shape(&self, layer: usize) -> [usize; 4] {
        let c = &self.convs[layer];
        let cin = if layer == 0 { self.in_channels } else { self.convs[layer - 1].out_channels };
        [c.out_channels, cin, c.kernel, c.kernel]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone<T> {
    spec: BackboneSpec,
    weights: [Tensor<T>; 3],
    biases: [Tensor<T>; 3],
}

impl<T: Scalar> Backbone<T> {
    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    /// He-normal weights, zero biases.
    pub fn random<R: Rng>(spec: BackboneSpec, rng: &mut R) -> Self {
        let weights = [0, 1, 2].map(|l| {
            let shape = spec.weight_shape(l);
            let fan_in = (shape[1] * shape[2] * shape[3]) as f64;
            let std = (2.0 / fan_in).sqrt();
            Tensor::from_fn(&shape, |_| {
                let z: f64 = StandardNormal.sample(rng);
                T::of(z * std)
            })
        });
        let biases = [0, 1, 2].map(|l| Tensor::zeros(&[spec.convs[l].out_channels]));
        Self { spec, weights, biases }
    }

    /// Deterministic filter bank: oriented edges, bars, centre-surround and
    /// blur filters over the input channel mean in conv1 (so ON and OFF
    /// events look alike); conv2/conv3 pass individual channels through a
    /// centre tap or a left/right or top/bottom split. Each filter has unit
    /// L1 norm.
    pub fn handcrafted(spec: BackboneSpec) -> Self {
        let w1 = conv1_bank(&spec);
        let profiles = [Profile::Center, Profile::SplitX, Profile::SplitY];
        let w2 = channel_pooling_bank(spec.weight_shape(1), &profiles);
        let w3 = channel_pooling_bank(spec.weight_shape(2), &profiles);
        let weights = [w1, w2, w3].map(|w| w.cast());
        let biases = [0, 1, 2].map(|l| Tensor::zeros(&[spec.convs[l].out_channels]));
        Self { spec, weights, biases }
    }

    pub fn from_weights(spec: BackboneSpec, file: &WeightFile) -> Result<Self, WeightFileError> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..3 {
            weights.push(file.tensor(&format!("conv{}.weight", l + 1), &spec.weight_shape(l))?);
            biases.push(file.tensor(&format!("conv{}.bias", l + 1), &[spec.convs[l].out_channels])?);
        }
        let to3 = |v: Vec<Tensor<T>>| -> [Tensor<T>; 3] { v.try_into().expect("three layers") };
        Ok(Self { spec, weights: to3(weights), biases: to3(biases) })
    }

    pub fn to_weights(&self, file: &mut WeightFile) {
        for (name, t) in self.params() {
            file.push(name, t);
        }
    }

    /// `C×H×W` input to the conv3 feature map.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
        if input.ndim() != 3 || input.dim(0) != self.spec.in_channels {
            return Err(ShapeError::new(
                "backbone",
                format!("expected {}×H×W input, got {:?}", self.spec.in_channels, input.shape()),
            ));
        }
        let mut x = input.clone();
        for l in 0..3 {
            let c = &self.spec.convs[l];
            x = relu(&conv2d(&x, &self.weights[l], &self.biases[l], c.stride, c.padding)?);
            if let Some(p) = self.spec.pools[l] {
                x = max_pool2d(&x, p.kernel, p.stride, p.padding)?.0;
            }
        }
        Ok(x)
    }
}

impl<T: Scalar> Parameterized<T> for Backbone<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        (0..3)
            .flat_map(|l| {
                [
                    (format!("conv{}.weight", l + 1), &self.weights[l]),
                    (format!("conv{}.bias", l + 1), &self.biases[l]),
                ]
            })
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| [w, b]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Profile {
    Center,
    /// left half positive, right half negative
    SplitX,
    SplitY,
}

fn profile_kernel(p: Profile, k: usize) -> Vec<f64> {
    let r = (k as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let (y, x) = (i as f64 - r, j as f64 - r);
            out[i * k + j] = match p {
                Profile::Center => f64::from(u8::from(x == 0.0 && y == 0.0)),
                Profile::SplitX => x.signum() * -1.0,
                Profile::SplitY => y.signum() * -1.0,
            };
        }
    }
    out
}

fn l1_normalise(v: &mut [f64]) {
    let s: f64 = v.iter().map(|x| x.abs()).sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn zero_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Filter `o` reads input channel `o % cin` through profile `(o / cin) % profiles.len()`.
fn channel_pooling_bank(shape: [usize; 4], profiles: &[Profile]) -> Tensor<f64> {
    let [o, cin, k, _] = shape;
    let mut w = vec![0.0; o * cin * k * k];
    for f in 0..o {
        let c = f % cin;
        let mut ker = profile_kernel(profiles[(f / cin) % profiles.len()], k);
        l1_normalise(&mut ker);
        let base = (f * cin + c) * k * k;
        w[base..base + k * k].copy_from_slice(&ker);
    }
    Tensor::new(shape.to_vec(), w).expect("bank shape")
}

#[derive(Debug, Clone, Copy)]
enum Recipe {
    /// first derivative of a Gaussian along `angle`
    Edge { angle: f64, sigma: f64 },
    /// second derivative across `angle`; `sign` 1 favours bright bars, -1 dark ones
    Bar { angle: f64, sigma: f64, sign: f64 },
    /// difference of Gaussians; `on` responds to bright centres
    CenterSurround { sigma: f64, on: bool },
    Blur { sigma: f64 },
}

fn recipe_kernel(r: Recipe, k: usize) -> Vec<f64> {
    let rad = (k as f64 - 1.0) / 2.0;
    let mut v = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let (y, x) = (i as f64 - rad, j as f64 - rad);
            let g = |s: f64| (-(x * x + y * y) / (2.0 * s * s)).exp() / (s * s);
            v[i * k + j] = match r {
                Recipe::Edge { angle, sigma } => {
                    let u = x * angle.cos() + y * angle.sin();
                    u * g(sigma)
                }
                Recipe::Bar { angle, sigma, sign } => {
                    let u = -x * angle.sin() + y * angle.cos();
                    sign * (1.0 - u * u / (sigma * sigma)) * g(sigma)
                }
                Recipe::CenterSurround { sigma, on } => {
                    let d = g(sigma) - g(2.5 * sigma);
                    if on { d } else { -d }
                }
                Recipe::Blur { sigma } => g(sigma),
            };
        }
    }
    if !matches!(r, Recipe::Blur { .. }) {
        zero_mean(&mut v);
    }
    l1_normalise(&mut v);
    v
}

fn conv1_bank(spec: &BackboneSpec) -> Tensor<f64> {
    let [o, cin, k, _] = spec.weight_shape(0);
    let mut recipes = Vec::new();
    for scale in [1.0, 2.0, 3.0] {
        recipes.push(Recipe::Blur { sigma: 1.0 * scale });
        for on in [true, false] {
            recipes.push(Recipe::CenterSurround { sigma: 0.8 * scale, on });
        }
        for a in 0..16 {
            recipes.push(Recipe::Edge { angle: a as f64 * PI / 8.0, sigma: 1.0 * scale });
        }
        for sign in [1.0, -1.0] {
            for a in 0..8 {
                recipes.push(Recipe::Bar { angle: a as f64 * PI / 8.0, sigma: 0.8 * scale, sign });
            }
        }
    }
    // every filter reads the channel mean
    let mut w = vec![0.0; o * cin * k * k];
    for f in 0..o {
        let ker = recipe_kernel(recipes[f % recipes.len()], k);
        for c in 0..cin {
            let base = (f * cin + c) * k * k;
            for (d, &v) in w[base..base + k * k].iter_mut().zip(&ker) {
                *d = v / cin as f64;
            }
        }
    }
    Tensor::new(vec![o, cin, k, k], w).expect("bank shape")
}
