//! Feature-level fusion baselines over `C×N` maps.

use super::feature_dims;
use crate::nn::linear::Linear;
use crate::nn::loss::sigmoid;
use crate::nn::optim::Parameterized;
use crate::scalar::{gemm, Scalar};
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MiddleMode {
    Concat,
    Add,
    Conv1x1,
    /// per-channel sigmoid gates from the pooled stack
    ChannelAttention,
    /// per-position sigmoid gate map
    SpatialAttention,
}

impl MiddleMode {
    pub fn output_channels(&self, c: usize) -> usize {
        match self {
            MiddleMode::Add | MiddleMode::Conv1x1 => c,
            _ => 2 * c,
        }
    }
}

/// Mode plus its learned parameters, if any.
#[derive(Debug, Clone, PartialEq)]
pub enum MiddleFusion<T> {
    Concat,
    Add,
    /// `C×2C` mixing matrix and bias
    Conv1x1(Linear<T>),
    /// `2C→2C` gate layer on the global-average-pooled stack
    ChannelAttention(Linear<T>),
    /// `2C→1` gate layer applied at every position
    SpatialAttention(Linear<T>),
}

impl<T: Scalar> MiddleFusion<T> {
    /// `conv1x1` starts as the average of both branches; attention gates start at 0.5.
    pub fn new(mode: MiddleMode, c: usize) -> Self {
        match mode {
            MiddleMode::Concat => MiddleFusion::Concat,
            MiddleMode::Add => MiddleFusion::Add,
            MiddleMode::Conv1x1 => {
                let half = T::of(0.5);
                let mut l = Linear::zeros(2 * c, c);
                for i in 0..c {
                    l.weight.data_mut()[i * 2 * c + i] = half;
                    l.weight.data_mut()[i * 2 * c + c + i] = half;
                }
                MiddleFusion::Conv1x1(l)
            }
            MiddleMode::ChannelAttention => MiddleFusion::ChannelAttention(Linear::zeros(2 * c, 2 * c)),
            MiddleMode::SpatialAttention => MiddleFusion::SpatialAttention(Linear::zeros(2 * c, 1)),
        }
    }

    pub fn mode(&self) -> MiddleMode {
        match self {
            MiddleFusion::Concat => MiddleMode::Concat,
            MiddleFusion::Add => MiddleMode::Add,
            MiddleFusion::Conv1x1(_) => MiddleMode::Conv1x1,
            MiddleFusion::ChannelAttention(_) => MiddleMode::ChannelAttention,
            MiddleFusion::SpatialAttention(_) => MiddleMode::SpatialAttention,
        }
    }

    fn layer(&self) -> Option<&Linear<T>> {
        match self {
            MiddleFusion::Conv1x1(l) | MiddleFusion::ChannelAttention(l) | MiddleFusion::SpatialAttention(l) => Some(l),
            _ => None,
        }
    }

    fn layer_mut(&mut self) -> Option<&mut Linear<T>> {
        match self {
            MiddleFusion::Conv1x1(l) | MiddleFusion::ChannelAttention(l) | MiddleFusion::SpatialAttention(l) => Some(l),
            _ => None,
        }
    }

    fn check(&self, c: usize) -> Result<(), ShapeError> {
        let want = match self.mode() {
            MiddleMode::Conv1x1 => [c, 2 * c],
            MiddleMode::ChannelAttention => [2 * c, 2 * c],
            MiddleMode::SpatialAttention => [1, 2 * c],
            _ => return Ok(()),
        };
        let l = self.layer().expect("parameterised mode");
        if l.weight.shape() == want && l.bias.len() == want[0] {
            Ok(())
        } else {
            Err(ShapeError::new("middle_fuse", format!("weights {:?} do not fit {c} channels", l.weight.shape())))
        }
    }
}

impl<T: Scalar> Parameterized<T> for MiddleFusion<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        match self.layer() {
            Some(l) => vec![("mid.weight".into(), &l.weight), ("mid.bias".into(), &l.bias)],
            None => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self.layer_mut() {
            Some(l) => vec![&mut l.weight, &mut l.bias],
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiddleCache<T> {
    /// `2C×N` channel stack of the inputs
    stack: Vec<T>,
    /// pooled stack (catt)
    pooled: Vec<T>,
    /// sigmoid gates: per channel (catt) or per position (satt)
    gates: Vec<T>,
}

/// Output is `C'×N` with `C'` given by [`MiddleMode::output_channels`].
pub fn middle_fuse<T: Scalar>(fv: &Tensor<T>, fe: &Tensor<T>, fusion: &MiddleFusion<T>) -> Result<Tensor<T>, ShapeError> {
    Ok(middle_forward(fv, fe, fusion)?.0)
}

pub fn middle_forward<T: Scalar>(
    fv: &Tensor<T>,
    fe: &Tensor<T>,
    fusion: &MiddleFusion<T>,
) -> Result<(Tensor<T>, MiddleCache<T>), ShapeError> {
    fv.check_same(fe, "middle_fuse")?;
    let (c, n) = feature_dims(fv, "middle_fuse")?;
    fusion.check(c)?;
    let mut stack = fv.data().to_vec();
    stack.extend_from_slice(fe.data());
    let mut pooled = Vec::new();
    let mut gates = Vec::new();
    let out = match fusion {
        MiddleFusion::Concat => stack.clone(),
        MiddleFusion::Add => fv.data().iter().zip(fe.data()).map(|(&a, &b)| a + b).collect(),
        MiddleFusion::Conv1x1(l) => {
            let mut out = vec![T::zero(); c * n];
            for (row, &b) in out.chunks_exact_mut(n).zip(l.bias.data()) {
                row.fill(b);
            }
            gemm(false, false, c, n, 2 * c, T::one(), l.weight.data(), &stack, T::one(), &mut out);
            out
        }
        MiddleFusion::ChannelAttention(l) => {
            let nf = T::of(n as f64);
            pooled = stack.chunks_exact(n).map(|r| r.iter().copied().sum::<T>() / nf).collect();
            let a = l.forward(&Tensor::vector(pooled.clone()))?;
            gates = a.data().iter().map(|&v| sigmoid(v)).collect();
            stack.chunks_exact(n).zip(&gates).flat_map(|(r, &g)| r.iter().map(move |&v| v * g)).collect()
        }
        MiddleFusion::SpatialAttention(l) => {
            let b = l.bias.data()[0];
            let mut a = vec![b; n];
            gemm(false, false, 1, n, 2 * c, T::one(), l.weight.data(), &stack, T::one(), &mut a);
            gates = a.into_iter().map(sigmoid).collect();
            stack.chunks_exact(n).flat_map(|r| r.iter().zip(&gates).map(|(&v, &g)| v * g)).collect::<Vec<_>>()
        }
    };
    let shape = match fv.ndim() {
        2 => vec![fusion.mode().output_channels(c), n],
        _ => {
            let mut s = fv.shape().to_vec();
            s[0] = fusion.mode().output_channels(c);
            s
        }
    };
    Ok((Tensor::new(shape, out)?, MiddleCache { stack, pooled, gates }))
}

#[derive(Debug, Clone)]
pub struct MiddleGrads<T> {
    pub fv: Tensor<T>,
    pub fe: Tensor<T>,
    pub params: MiddleFusion<T>,
}

pub fn middle_backward<T: Scalar>(
    fv: &Tensor<T>,
    fe: &Tensor<T>,
    fusion: &MiddleFusion<T>,
    cache: &MiddleCache<T>,
    grad_out: &Tensor<T>,
) -> Result<MiddleGrads<T>, ShapeError> {
    let (c, n) = feature_dims(fv, "middle_backward")?;
    let oc = fusion.mode().output_channels(c);
    if grad_out.len() != oc * n {
        return Err(ShapeError::new("middle_backward", format!("grad length {} != {}", grad_out.len(), oc * n)));
    }
    let g = grad_out.data();
    let stack = &cache.stack;
    let (g_stack, params): (Vec<T>, MiddleFusion<T>) = match fusion {
        MiddleFusion::Concat => (g.to_vec(), MiddleFusion::Concat),
        MiddleFusion::Add => ([g, g].concat(), MiddleFusion::Add),
        MiddleFusion::Conv1x1(l) => {
            let mut gw = vec![T::zero(); c * 2 * c];
            gemm(false, true, c, 2 * c, n, T::one(), g, stack, T::zero(), &mut gw);
            let gb: Vec<T> = g.chunks_exact(n).map(|r| r.iter().copied().sum()).collect();
            let mut gx = vec![T::zero(); 2 * c * n];
            gemm(true, false, 2 * c, n, c, T::one(), l.weight.data(), g, T::zero(), &mut gx);
            (gx, MiddleFusion::Conv1x1(Linear { weight: Tensor::new(vec![c, 2 * c], gw)?, bias: Tensor::vector(gb) }))
        }
        MiddleFusion::ChannelAttention(l) => {
            let nf = T::of(n as f64);
            let mut g_gate = Vec::with_capacity(2 * c);
            let mut gx = Vec::with_capacity(2 * c * n);
            for ((gr, xr), &s) in g.chunks_exact(n).zip(stack.chunks_exact(n)).zip(&cache.gates) {
                g_gate.push(gr.iter().zip(xr).map(|(&a, &b)| a * b).sum::<T>() * s * (T::one() - s));
                gx.extend(gr.iter().map(|&v| v * s));
            }
            let (g_pool, lg) = l.backward(&Tensor::vector(cache.pooled.clone()), &Tensor::vector(g_gate))?;
            for (row, &gp) in gx.chunks_exact_mut(n).zip(g_pool.data()) {
                row.iter_mut().for_each(|v| *v += gp / nf);
            }
            (gx, MiddleFusion::ChannelAttention(lg))
        }
        MiddleFusion::SpatialAttention(l) => {
            let mut g_a = vec![T::zero(); n];
            for (gr, xr) in g.chunks_exact(n).zip(stack.chunks_exact(n)) {
                for j in 0..n {
                    g_a[j] += gr[j] * xr[j];
                }
            }
            for (ga, &s) in g_a.iter_mut().zip(&cache.gates) {
                *ga *= s * (T::one() - s);
            }
            let mut gw = vec![T::zero(); 2 * c];
            gemm(false, true, 1, 2 * c, n, T::one(), &g_a, stack, T::zero(), &mut gw);
            let gb: T = g_a.iter().copied().sum();
            let mut gx: Vec<T> = g
                .chunks_exact(n)
                .flat_map(|r| r.iter().zip(&cache.gates).map(|(&v, &s)| v * s))
                .collect();
            for (row, &w) in gx.chunks_exact_mut(n).zip(l.weight.data()) {
                for (v, &ga) in row.iter_mut().zip(&g_a) {
                    *v += ga * w;
                }
            }
            let lg = Linear { weight: Tensor::new(vec![1, 2 * c], gw)?, bias: Tensor::vector(vec![gb]) };
            (gx, MiddleFusion::SpatialAttention(lg))
        }
    };
    let (gv, ge) = g_stack.split_at(c * n);
    Ok(MiddleGrads {
        fv: Tensor::new(fv.shape().to_vec(), gv.to_vec())?,
        fe: Tensor::new(fe.shape().to_vec(), ge.to_vec())?,
        params,
    })
}
