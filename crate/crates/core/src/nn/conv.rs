//! 2-D convolution (cross-correlation), max pooling and ReLU on `C×H×W`
//! tensors, each with an explicit backward pass.

use crate::scalar::{gemm, Scalar};
use crate::tensor::{ShapeError, Tensor};

/// Output length of a sliding window along one axis.
pub fn out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

fn chw(t: &Tensor<impl Scalar>, op: &'static str) -> Result<(usize, usize, usize), ShapeError> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(ShapeError::new(op, format!("expected C×H×W input, got {s:?}"))),
    }
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    padding: usize,
}

fn geometry<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(usize, Geometry), ShapeError> {
    let (c, h, w) = chw(input, "conv2d")?;
    let [o, wc, kh, kw] = *weight.shape() else {
        return Err(ShapeError::new("conv2d", format!("weight must be O×C×KH×KW, got {:?}", weight.shape())));
    };
    if wc != c {
        return Err(ShapeError::new("conv2d", format!("input has {c} channels, weight expects {wc}")));
    }
    if stride == 0 {
        return Err(ShapeError::new("conv2d", "stride must be >= 1"));
    }
    let oh = out_dim(h, kh, stride, padding)
        .ok_or_else(|| ShapeError::new("conv2d", format!("kernel {kh} larger than padded height {h}+2*{padding}")))?;
    let ow = out_dim(w, kw, stride, padding)
        .ok_or_else(|| ShapeError::new("conv2d", format!("kernel {kw} larger than padded width {w}+2*{padding}")))?;
    Ok((o, Geometry { c, h, w, kh, kw, oh, ow, stride, padding }))
}

/// `(C·KH·KW) × (OH·OW)` patch matrix.
fn im2col<T: Scalar>(x: &[T], g: &Geometry) -> Vec<T> {
    let p = g.oh * g.ow;
    let mut cols = vec![T::zero(); g.c * g.kh * g.kw * p];
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let dst = &mut cols[row + oy * g.ow..row + (oy + 1) * g.ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], g: &Geometry) -> Vec<T> {
    let p = g.oh * g.ow;
    let mut x = vec![T::zero(); g.c * g.h * g.w];
    for c in 0..g.c {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = ((c * g.kh + ki) * g.kw + kj) * p;
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.padding as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj) as isize - g.padding as isize;
                        if ix >= 0 && ix < g.w as isize {
                            x[(c * g.h + iy as usize) * g.w + ix as usize] += cols[row + oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// Cross-correlation of a `C×H×W` input with `O×C×KH×KW` weights plus a
/// per-output-channel bias. Zero padding on all sides.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>, ShapeError> {
    let (o, g) = geometry(input, weight, stride, padding)?;
    if bias.len() != o {
        return Err(ShapeError::new("conv2d", format!("bias has {} entries, expected {o}", bias.len())));
    }
    let p = g.oh * g.ow;
    let k = g.c * g.kh * g.kw;
    let mut out = Vec::with_capacity(o * p);
    for &b in bias.data() {
        out.extend(std::iter::repeat_n(b, p));
    }
    if g.kh == 1 && g.kw == 1 && g.stride == 1 && g.padding == 0 {
        gemm(false, false, o, p, k, T::one(), weight.data(), input.data(), T::one(), &mut out);
    } else {
        let cols = im2col(input.data(), &g);
        gemm(false, false, o, p, k, T::one(), weight.data(), &cols, T::one(), &mut out);
    }
    Tensor::new(vec![o, g.oh, g.ow], out)
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    grad_out: &Tensor<T>,
) -> Result<Conv2dGrads<T>, ShapeError> {
    let (o, g) = geometry(input, weight, stride, padding)?;
    if grad_out.shape() != [o, g.oh, g.ow] {
        return Err(ShapeError::new(
            "conv2d_backward",
            format!("grad_out {:?} vs output {:?}", grad_out.shape(), [o, g.oh, g.ow]),
        ));
    }
    let p = g.oh * g.ow;
    let k = g.c * g.kh * g.kw;
    let cols = im2col(input.data(), &g);
    let mut gw = vec![T::zero(); o * k];
    gemm(false, true, o, k, p, T::one(), grad_out.data(), &cols, T::zero(), &mut gw);
    let mut gcols = vec![T::zero(); k * p];
    gemm(true, false, k, p, o, T::one(), weight.data(), grad_out.data(), T::zero(), &mut gcols);
    let gb = grad_out.data().chunks_exact(p).map(|r| r.iter().copied().sum()).collect();
    Ok(Conv2dGrads {
        input: Tensor::new(input.shape().to_vec(), col2im(&gcols, &g))?,
        weight: Tensor::new(weight.shape().to_vec(), gw)?,
        bias: Tensor::vector(gb),
    })
}

/// Max pooling. Returns the output and, per output element, the flat input
/// index that produced it (first maximum in scan order).
pub fn max_pool2d<T: Scalar>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Vec<usize>), ShapeError> {
    let (c, h, w) = chw(input, "max_pool2d")?;
    if padding >= kernel {
        return Err(ShapeError::new("max_pool2d", "padding must be smaller than the kernel"));
    }
    let oh = out_dim(h, kernel, stride, padding).ok_or_else(|| ShapeError::new("max_pool2d", "window larger than input"))?;
    let ow = out_dim(w, kernel, stride, padding).ok_or_else(|| ShapeError::new("max_pool2d", "window larger than input"))?;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = T::neg_infinity();
                let mut best_i = usize::MAX;
                for ki in 0..kernel {
                    let iy = (oy * stride + ki) as isize - padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kj in 0..kernel {
                        let ix = (ox * stride + kj) as isize - padding as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let i = (ch * h + iy as usize) * w + ix as usize;
                        if best_i == usize::MAX || x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out)?, arg))
}

pub fn max_pool2d_backward<T: Scalar>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut g = Tensor::zeros(input_shape);
    let gd = g.data_mut();
    for (&i, &v) in argmax.iter().zip(grad_out.data()) {
        gd[i] += v;
    }
    g
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Gradient of ReLU given its input `x`.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    x.zip_map(grad_out, |v, g| if v > T::zero() { g } else { T::zero() })
        .expect("relu_backward: shapes agree")
}
