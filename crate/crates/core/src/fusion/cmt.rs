//! Cross-modality transformer: a multiplicative base-vector query drives a
//! spatial cross-attention over each modality, followed by a non-local
//! self-attention block per modality; the two results are concatenated.
//!
//! Feature maps are `C×N` (any `C×H×W` input is viewed with `N = H·W`).

use rand::Rng;

use super::feature_dims;
use crate::nn::linear::Linear;
use crate::nn::loss::{softmax, softmax_backward, softmax_rows, softmax_rows_backward};
use crate::nn::optim::Parameterized;
use crate::scalar::{gemm, Scalar};
use crate::tensor::{ShapeError, Tensor};

/// Channel-sum each map to a length-`N` vector and multiply them elementwise.
pub fn base_vector<T: Scalar>(fv: &Tensor<T>, fe: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    fv.check_same(fe, "base_vector")?;
    let (c, n) = feature_dims(fv, "base_vector")?;
    let sv = channel_sum(fv.data(), c, n);
    let se = channel_sum(fe.data(), c, n);
    Ok(Tensor::vector(sv.iter().zip(&se).map(|(&a, &b)| a * b).collect()))
}

fn channel_sum<T: Scalar>(x: &[T], c: usize, n: usize) -> Vec<T> {
    let mut s = vec![T::zero(); n];
    for row in x.chunks_exact(n).take(c) {
        for (a, &v) in s.iter_mut().zip(row) {
            *a += v;
        }
    }
    s
}

/// Two-layer scoring MLP `R^N → R^N` with a ReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossMlp<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
}

impl<T: Scalar> CrossMlp<T> {
    pub fn zeros(n: usize) -> Self {
        Self { l1: Linear::zeros(n, n), l2: Linear::zeros(n, n) }
    }

    pub fn random<R: Rng>(n: usize, std: f64, rng: &mut R) -> Self {
        Self { l1: Linear::normal(n, n, std, rng), l2: Linear::normal(n, n, std, rng) }
    }

    pub fn positions(&self) -> usize {
        self.l1.in_dim()
    }

    fn params_named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{prefix}.l1.weight"), &self.l1.weight));
        out.push((format!("{prefix}.l1.bias"), &self.l1.bias));
        out.push((format!("{prefix}.l2.weight"), &self.l2.weight));
        out.push((format!("{prefix}.l2.bias"), &self.l2.bias));
    }

    fn params_mut_into<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.extend([&mut self.l1.weight, &mut self.l1.bias, &mut self.l2.weight, &mut self.l2.bias]);
    }
}

#[derive(Debug, Clone)]
pub struct CrossAttendCache<T> {
    hidden_pre: Tensor<T>,
    hidden: Tensor<T>,
    /// `N · softmax(scores)`
    weights: Vec<T>,
}

/// Spatial cross-attention. Scores `s = mlp(m)`, `α = softmax(s)` and the
/// output is `F̃[:, j] = N·α_j·F[:, j]`, which is exactly `F` when `α` is uniform.
pub fn cross_attend<T: Scalar>(m: &Tensor<T>, ctx: &Tensor<T>, mlp: &CrossMlp<T>) -> Result<Tensor<T>, ShapeError> {
    Ok(cross_attend_forward(m, ctx, mlp)?.0)
}

pub fn cross_attend_forward<T: Scalar>(
    m: &Tensor<T>,
    ctx: &Tensor<T>,
    mlp: &CrossMlp<T>,
) -> Result<(Tensor<T>, CrossAttendCache<T>), ShapeError> {
    let (_, n) = feature_dims(ctx, "cross_attend")?;
    if m.len() != n || mlp.positions() != n {
        return Err(ShapeError::new(
            "cross_attend",
            format!("query length {}, context positions {n}, mlp width {}", m.len(), mlp.positions()),
        ));
    }
    let m = m.clone().flatten();
    let hidden_pre = mlp.l1.forward(&m)?;
    let hidden = hidden_pre.map(|v| v.max(T::zero()));
    let scores = mlp.l2.forward(&hidden)?;
    let mx = scores.data().iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scores.data().iter().map(|&s| (s - mx).exp()).collect();
    let mean: T = exps.iter().copied().sum::<T>() / T::of(n as f64);
    let weights: Vec<T> = exps.iter().map(|&e| e / mean).collect();
    let mut out = ctx.clone();
    for row in out.data_mut().chunks_exact_mut(n) {
        for (v, &w) in row.iter_mut().zip(&weights) {
            *v *= w;
        }
    }
    Ok((out, CrossAttendCache { hidden_pre, hidden, weights }))
}

#[derive(Debug, Clone)]
pub struct CrossAttendGrads<T> {
    pub query: Tensor<T>,
    pub ctx: Tensor<T>,
    pub mlp: CrossMlp<T>,
}

pub fn cross_attend_backward<T: Scalar>(
    m: &Tensor<T>,
    ctx: &Tensor<T>,
    mlp: &CrossMlp<T>,
    cache: &CrossAttendCache<T>,
    grad_out: &Tensor<T>,
) -> Result<CrossAttendGrads<T>, ShapeError> {
    ctx.check_same(grad_out, "cross_attend_backward")?;
    let (_, n) = feature_dims(ctx, "cross_attend_backward")?;
    let nf = T::of(n as f64);
    let mut g_ctx = grad_out.clone();
    let mut g_w = vec![T::zero(); n];
    for (g_row, c_row) in g_ctx.data_mut().chunks_exact_mut(n).zip(ctx.data().chunks_exact(n)) {
        for j in 0..n {
            g_w[j] += g_row[j] * c_row[j];
            g_row[j] *= cache.weights[j];
        }
    }
    // weights = n * softmax(scores)
    let alpha: Vec<T> = cache.weights.iter().map(|&w| w / nf).collect();
    let g_scores: Vec<T> = softmax_backward(&alpha, &g_w).into_iter().map(|v| v * nf).collect();
    let g_scores = Tensor::vector(g_scores);
    let (g_hidden, l2) = mlp.l2.backward(&cache.hidden, &g_scores)?;
    let g_pre = cache
        .hidden_pre
        .zip_map(&g_hidden, |x, g| if x > T::zero() { g } else { T::zero() })?;
    let (g_m, l1) = mlp.l1.backward(&m.clone().flatten(), &g_pre)?;
    Ok(CrossAttendGrads { query: g_m.reshape(m.shape())?, ctx: g_ctx, mlp: CrossMlp { l1, l2 } })
}

/// Non-local block parameters for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfAttention<T> {
    /// `d×C` query projection
    pub w_h: Tensor<T>,
    /// `d×C` key projection
    pub w_g: Tensor<T>,
    /// `d×C` value projection
    pub w_o: Tensor<T>,
    /// `C×d` output projection
    pub w_p: Tensor<T>,
    /// residual gain, shape `[1]`
    pub gamma: Tensor<T>,
}

/// Key/query width for `c` channels.
pub fn attention_dim(c: usize) -> usize {
    (c / 8).max(1)
}

impl<T: Scalar> SelfAttention<T> {
    pub fn zeros(c: usize) -> Self {
        let d = attention_dim(c);
        Self {
            w_h: Tensor::zeros(&[d, c]),
            w_g: Tensor::zeros(&[d, c]),
            w_o: Tensor::zeros(&[d, c]),
            w_p: Tensor::zeros(&[c, d]),
            gamma: Tensor::zeros(&[1]),
        }
    }

    /// Gaussian projections, `gamma = 0`.
    pub fn random<R: Rng>(c: usize, std: f64, rng: &mut R) -> Self {
        let d = attention_dim(c);
        let mut draw = |shape: &[usize]| Linear::<T>::normal(shape[1], shape[0], std, rng).weight;
        Self {
            w_h: draw(&[d, c]),
            w_g: draw(&[d, c]),
            w_o: draw(&[d, c]),
            w_p: draw(&[c, d]),
            gamma: Tensor::zeros(&[1]),
        }
    }

    pub fn channels(&self) -> usize {
        self.w_h.dim(1)
    }

    pub fn dim(&self) -> usize {
        self.w_h.dim(0)
    }

    fn check(&self, c: usize) -> Result<(), ShapeError> {
        let d = self.dim();
        let ok = self.w_h.shape() == [d, c]
            && self.w_g.shape() == [d, c]
            && self.w_o.shape() == [d, c]
            && self.w_p.shape() == [c, d]
            && self.gamma.len() == 1;
        if ok {
            Ok(())
        } else {
            Err(ShapeError::new("self_attend", format!("weights do not match {c} channels")))
        }
    }

    fn params_named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{prefix}.w_h"), &self.w_h));
        out.push((format!("{prefix}.w_g"), &self.w_g));
        out.push((format!("{prefix}.w_o"), &self.w_o));
        out.push((format!("{prefix}.w_p"), &self.w_p));
        out.push((format!("{prefix}.gamma"), &self.gamma));
    }

    fn params_mut_into<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.extend([&mut self.w_h, &mut self.w_g, &mut self.w_o, &mut self.w_p, &mut self.gamma]);
    }
}

#[derive(Debug, Clone)]
pub struct SelfAttendCache<T> {
    h: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    /// row-softmaxed `N×N` attention
    attn: Tensor<T>,
    y: Vec<T>,
    z: Vec<T>,
}

/// `out = F + γ · W_p((W_o F) Aᵀ)` with `A = row_softmax((W_h F)ᵀ (W_g F))`.
pub fn self_attend<T: Scalar>(f: &Tensor<T>, w: &SelfAttention<T>) -> Result<Tensor<T>, ShapeError> {
    Ok(self_attend_forward(f, w)?.0)
}

/// The `N×N` attention matrix (rows index queries, columns keys).
pub fn attention_matrix<T: Scalar>(f: &Tensor<T>, w: &SelfAttention<T>) -> Result<Tensor<T>, ShapeError> {
    Ok(self_attend_forward(f, w)?.1.attn)
}

pub fn self_attend_forward<T: Scalar>(
    f: &Tensor<T>,
    w: &SelfAttention<T>,
) -> Result<(Tensor<T>, SelfAttendCache<T>), ShapeError> {
    let (c, n) = feature_dims(f, "self_attend")?;
    w.check(c)?;
    let d = w.dim();
    let x = f.data();
    let project = |wt: &Tensor<T>| {
        let mut out = vec![T::zero(); d * n];
        gemm(false, false, d, n, c, T::one(), wt.data(), x, T::zero(), &mut out);
        out
    };
    let (h, g, o) = (project(&w.w_h), project(&w.w_g), project(&w.w_o));
    let mut s = vec![T::zero(); n * n];
    gemm(true, false, n, n, d, T::one(), &h, &g, T::zero(), &mut s);
    let attn = softmax_rows(&Tensor::new(vec![n, n], s)?);
    let mut y = vec![T::zero(); d * n];
    gemm(false, true, d, n, n, T::one(), &o, attn.data(), T::zero(), &mut y);
    let mut z = vec![T::zero(); c * n];
    gemm(false, false, c, n, d, T::one(), w.w_p.data(), &y, T::zero(), &mut z);
    let gamma = w.gamma.data()[0];
    let out: Vec<T> = x.iter().zip(&z).map(|(&a, &b)| a + gamma * b).collect();
    Ok((Tensor::new(f.shape().to_vec(), out)?, SelfAttendCache { h, g, o, attn, y, z }))
}

#[derive(Debug, Clone)]
pub struct SelfAttendGrads<T> {
    pub input: Tensor<T>,
    pub weights: SelfAttention<T>,
}

pub fn self_attend_backward<T: Scalar>(
    f: &Tensor<T>,
    w: &SelfAttention<T>,
    cache: &SelfAttendCache<T>,
    grad_out: &Tensor<T>,
) -> Result<SelfAttendGrads<T>, ShapeError> {
    f.check_same(grad_out, "self_attend_backward")?;
    let (c, n) = feature_dims(f, "self_attend_backward")?;
    let d = w.dim();
    let gamma = w.gamma.data()[0];
    let go = grad_out.data();

    let g_gamma: T = go.iter().zip(&cache.z).map(|(&a, &b)| a * b).sum();
    let gz: Vec<T> = go.iter().map(|&v| v * gamma).collect();

    let mut g_wp = vec![T::zero(); c * d];
    gemm(false, true, c, d, n, T::one(), &gz, &cache.y, T::zero(), &mut g_wp);
    let mut gy = vec![T::zero(); d * n];
    gemm(true, false, d, n, c, T::one(), w.w_p.data(), &gz, T::zero(), &mut gy);

    let mut g_o = vec![T::zero(); d * n];
    gemm(false, false, d, n, n, T::one(), &gy, cache.attn.data(), T::zero(), &mut g_o);
    let mut g_attn = vec![T::zero(); n * n];
    gemm(true, false, n, n, d, T::one(), &gy, &cache.o, T::zero(), &mut g_attn);
    let g_s = softmax_rows_backward(&cache.attn, &Tensor::new(vec![n, n], g_attn)?);

    let mut g_h = vec![T::zero(); d * n];
    gemm(false, true, d, n, n, T::one(), &cache.g, g_s.data(), T::zero(), &mut g_h);
    let mut g_g = vec![T::zero(); d * n];
    gemm(false, false, d, n, n, T::one(), &cache.h, g_s.data(), T::zero(), &mut g_g);

    let x = f.data();
    let weight_grad = |gp: &[T]| {
        let mut out = vec![T::zero(); d * c];
        gemm(false, true, d, c, n, T::one(), gp, x, T::zero(), &mut out);
        Tensor::new(vec![d, c], out)
    };
    let mut g_x = go.to_vec();
    for (wt, gp) in [(&w.w_h, &g_h), (&w.w_g, &g_g), (&w.w_o, &g_o)] {
        gemm(true, false, c, n, d, T::one(), wt.data(), gp, T::one(), &mut g_x);
    }
    Ok(SelfAttendGrads {
        input: Tensor::new(f.shape().to_vec(), g_x)?,
        weights: SelfAttention {
            w_h: weight_grad(&g_h)?,
            w_g: weight_grad(&g_g)?,
            w_o: weight_grad(&g_o)?,
            w_p: Tensor::new(vec![c, d], g_wp)?,
            gamma: Tensor::scalar(g_gamma),
        },
    })
}

/// All cross-modality transformer parameters for `C` channels and `N` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct CmtWeights<T> {
    /// scores positions of the event features
    pub cross_ve: CrossMlp<T>,
    /// scores positions of the visible features
    pub cross_ev: CrossMlp<T>,
    pub self_v: SelfAttention<T>,
    pub self_e: SelfAttention<T>,
}

impl<T: Scalar> CmtWeights<T> {
    /// All weights zero: `cmt_fuse` reduces to plain concatenation.
    pub fn zeros(c: usize, n: usize) -> Self {
        Self {
            cross_ve: CrossMlp::zeros(n),
            cross_ev: CrossMlp::zeros(n),
            self_v: SelfAttention::zeros(c),
            self_e: SelfAttention::zeros(c),
        }
    }

    /// Gaussian weights scaled by fan-in; residual gains start at zero.
    /// Random projections with a zero output layer in each cross MLP and
    /// zero `gamma`, so training starts from the concatenation.
    pub fn random<R: Rng>(c: usize, n: usize, rng: &mut R) -> Self {
        let mlp_std = (1.0 / n as f64).sqrt();
        let att_std = (1.0 / c as f64).sqrt();
        let mut scorer = || CrossMlp { l1: Linear::normal(n, n, mlp_std, rng), l2: Linear::zeros(n, n) };
        Self {
            cross_ve: scorer(),
            cross_ev: scorer(),
            self_v: SelfAttention::random(c, att_std, rng),
            self_e: SelfAttention::random(c, att_std, rng),
        }
    }

    pub fn channels(&self) -> usize {
        self.self_v.channels()
    }

    pub fn positions(&self) -> usize {
        self.cross_ve.positions()
    }
}

impl<T: Scalar> Parameterized<T> for CmtWeights<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.cross_ve.params_named("cmt.cross_ve", &mut out);
        self.cross_ev.params_named("cmt.cross_ev", &mut out);
        self.self_v.params_named("cmt.self_v", &mut out);
        self.self_e.params_named("cmt.self_e", &mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.cross_ve.params_mut_into(&mut out);
        self.cross_ev.params_mut_into(&mut out);
        self.self_v.params_mut_into(&mut out);
        self.self_e.params_mut_into(&mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub struct CmtCache<T> {
    m: Tensor<T>,
    cross_v: CrossAttendCache<T>,
    cross_e: CrossAttendCache<T>,
    attended_v: Tensor<T>,
    attended_e: Tensor<T>,
    self_v: SelfAttendCache<T>,
    self_e: SelfAttendCache<T>,
}

/// Fused feature of length `2·C·N`: visible block then event block.
pub fn cmt_fuse<T: Scalar>(fv: &Tensor<T>, fe: &Tensor<T>, w: &CmtWeights<T>) -> Result<Tensor<T>, ShapeError> {
    Ok(cmt_forward(fv, fe, w)?.0)
}

pub fn cmt_forward<T: Scalar>(
    fv: &Tensor<T>,
    fe: &Tensor<T>,
    w: &CmtWeights<T>,
) -> Result<(Tensor<T>, CmtCache<T>), ShapeError> {
    let m = base_vector(fv, fe)?;
    let (attended_e, cross_e) = cross_attend_forward(&m, fe, &w.cross_ve)?;
    let (attended_v, cross_v) = cross_attend_forward(&m, fv, &w.cross_ev)?;
    let (out_e, self_e) = self_attend_forward(&attended_e, &w.self_e)?;
    let (out_v, self_v) = self_attend_forward(&attended_v, &w.self_v)?;
    let mut data = out_v.into_data();
    data.extend_from_slice(out_e.data());
    Ok((
        Tensor::vector(data),
        CmtCache { m, cross_v, cross_e, attended_v, attended_e, self_v, self_e },
    ))
}

#[derive(Debug, Clone)]
pub struct CmtGrads<T> {
    pub fv: Tensor<T>,
    pub fe: Tensor<T>,
    pub weights: CmtWeights<T>,
}

pub fn cmt_backward<T: Scalar>(
    fv: &Tensor<T>,
    fe: &Tensor<T>,
    w: &CmtWeights<T>,
    cache: &CmtCache<T>,
    grad_out: &Tensor<T>,
) -> Result<CmtGrads<T>, ShapeError> {
    let (c, n) = feature_dims(fv, "cmt_backward")?;
    if grad_out.len() != 2 * c * n {
        return Err(ShapeError::new("cmt_backward", format!("grad length {} != {}", grad_out.len(), 2 * c * n)));
    }
    let (gv, ge) = grad_out.data().split_at(c * n);
    let gv = Tensor::new(fv.shape().to_vec(), gv.to_vec())?;
    let ge = Tensor::new(fe.shape().to_vec(), ge.to_vec())?;

    let sv = self_attend_backward(&cache.attended_v, &w.self_v, &cache.self_v, &gv)?;
    let se = self_attend_backward(&cache.attended_e, &w.self_e, &cache.self_e, &ge)?;
    let cv = cross_attend_backward(&cache.m, fv, &w.cross_ev, &cache.cross_v, &sv.input)?;
    let ce = cross_attend_backward(&cache.m, fe, &w.cross_ve, &cache.cross_e, &se.input)?;

    // m = sum_c(F_v) ⊙ sum_c(F_e)
    let g_m = cv.query.add(&ce.query)?;
    let sum_v = channel_sum(fv.data(), c, n);
    let sum_e = channel_sum(fe.data(), c, n);
    let mut g_fv = cv.ctx;
    let mut g_fe = ce.ctx;
    for (row_v, row_e) in g_fv.data_mut().chunks_exact_mut(n).zip(g_fe.data_mut().chunks_exact_mut(n)) {
        for j in 0..n {
            row_v[j] += g_m.data()[j] * sum_e[j];
            row_e[j] += g_m.data()[j] * sum_v[j];
        }
    }
    Ok(CmtGrads {
        fv: g_fv,
        fe: g_fe,
        weights: CmtWeights { cross_ve: ce.mlp, cross_ev: cv.mlp, self_v: sv.weights, self_e: se.weights },
    })
}

/// Attention weights `softmax(mlp(m))` (for inspection).
pub fn cross_attention_weights<T: Scalar>(m: &Tensor<T>, mlp: &CrossMlp<T>) -> Result<Vec<T>, ShapeError> {
    let h = mlp.l1.forward(&m.clone().flatten())?.map(|v| v.max(T::zero()));
    Ok(softmax(mlp.l2.forward(&h)?.data()))
}
