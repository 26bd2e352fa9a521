//! Central finite-difference checks of every analytic backward pass.

use evfuse::fusion::cmt::{CrossMlp, SelfAttention};
use evfuse::fusion::middle::{middle_backward, middle_forward, MiddleFusion, MiddleMode};
use evfuse::fusion::{cmt_backward, cmt_forward, cross_attend_backward, cross_attend_forward, self_attend_backward, self_attend_forward, CmtWeights};
use evfuse::nn::{
    bce_loss, bce_loss_batch, conv2d, conv2d_backward, fc, fc_backward, instance_embedding_loss, max_pool2d,
    max_pool2d_backward, relu, relu_backward, softmax, softmax_backward, softmax_rows, softmax_rows_backward,
    Parameterized,
};
use evfuse::tracker::classifier::Classifier;
use evfuse::Tensor;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SEEDS: u64 = 20;
pub const TOLERANCE: f64 = 1e-4;
const H: f64 = 1e-5;
/// gradient differences below this norm count as agreement
const ABS_FLOOR: f64 = 1e-9;

pub type Check = fn(u64) -> f64;

pub const OPS: &[(&str, Check)] = &[
    ("conv", conv),
    ("fc", fully_connected),
    ("relu", relu_op),
    ("max_pool", max_pool),
    ("softmax", softmax_op),
    ("softmax_rows", softmax_rows_op),
    ("bce", bce),
    ("bce_batch", bce_batch),
    ("instance_embedding", instance_embedding),
    ("cross_attend", cross_attend),
    ("self_attend", self_attend),
    ("cmt_fuse", cmt),
    ("middle_fusion", middle),
    ("classifier", classifier),
];

/// Worst relative error of `op` over all seeds.
pub fn worst(op: Check) -> f64 {
    (0..SEEDS).map(op).fold(0.0, f64::max)
}

fn normal<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let z: f64 = StandardNormal.sample(rng);
        z * std
    })
}

fn randomize<R: Rng>(tensors: Vec<&mut Tensor<f64>>, std: f64, rng: &mut R) {
    for t in tensors {
        for v in t.data_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = z * std;
        }
    }
}

/// Central differences of `loss` with respect to each tensor `access` exposes.
fn numeric<M: Clone>(model: &M, access: impl Fn(&mut M) -> Vec<&mut Tensor<f64>>, loss: impl Fn(&M) -> f64) -> Vec<Vec<f64>> {
    let mut m = model.clone();
    let count = access(&mut m).len();
    let mut out = Vec::with_capacity(count);
    for ti in 0..count {
        let len = access(&mut m)[ti].len();
        let mut g = Vec::with_capacity(len);
        for i in 0..len {
            let orig = access(&mut m)[ti].data()[i];
            access(&mut m)[ti].data_mut()[i] = orig + H;
            let lp = loss(&m);
            access(&mut m)[ti].data_mut()[i] = orig - H;
            let lm = loss(&m);
            access(&mut m)[ti].data_mut()[i] = orig;
            g.push((lp - lm) / (2.0 * H));
        }
        out.push(g);
    }
    out
}

/// Norm-wise relative error, per tensor; the worst one is returned.
fn compare(numeric: &[Vec<f64>], analytic: &[&Tensor<f64>]) -> f64 {
    assert_eq!(numeric.len(), analytic.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    numeric
        .iter()
        .zip(analytic)
        .map(|(n, a)| {
            assert_eq!(n.len(), a.len());
            let diff = norm(&mut n.iter().zip(a.data()).map(|(x, y)| x - y));
            if diff < ABS_FLOOR {
                return 0.0;
            }
            diff / norm(&mut n.iter().copied()).max(norm(&mut a.data().iter().copied()))
        })
        .fold(0.0, f64::max)
}

fn dot(a: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    a.data().iter().zip(r.data()).map(|(x, y)| x * y).sum()
}

pub fn conv(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let c = rng.random_range(1..=3);
    let o = rng.random_range(1..=4);
    let k = [1, 3, 5][rng.random_range(0..3)];
    let stride = rng.random_range(1..=2);
    let padding = rng.random_range(0..=k / 2);
    let h = k + rng.random_range(0..5);
    let w = k + rng.random_range(0..5);
    let model = (normal(&[c, h, w], 1.0, &mut rng), normal(&[o, c, k, k], 0.5, &mut rng), normal(&[o], 0.5, &mut rng));
    let out = conv2d(&model.0, &model.1, &model.2, stride, padding).unwrap();
    let r = normal(out.shape(), 1.0, &mut rng);
    let g = conv2d_backward(&model.0, &model.1, stride, padding, &r).unwrap();
    let n = numeric(&model, |m| vec![&mut m.0, &mut m.1, &mut m.2], |m| dot(&conv2d(&m.0, &m.1, &m.2, stride, padding).unwrap(), &r));
    compare(&n, &[&g.input, &g.weight, &g.bias])
}

pub fn fully_connected(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let (b, i, o) = (rng.random_range(1..=4), rng.random_range(1..=8), rng.random_range(1..=6));
    let model = (normal(&[b, i], 1.0, &mut rng), normal(&[o, i], 0.5, &mut rng), normal(&[o], 0.5, &mut rng));
    let r = normal(&[b, o], 1.0, &mut rng);
    let g = fc_backward(&model.0, &model.1, &r).unwrap();
    let n = numeric(&model, |m| vec![&mut m.0, &mut m.1, &mut m.2], |m| dot(&fc(&m.0, &m.1, &m.2).unwrap(), &r));
    compare(&n, &[&g.input, &g.weight, &g.bias])
}

pub fn relu_op(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let x = normal(&[2, 3, 4], 1.0, &mut rng);
    let r = normal(x.shape(), 1.0, &mut rng);
    let g = relu_backward(&x, &r);
    let n = numeric(&x, |m| vec![m], |m| dot(&relu(m), &r));
    compare(&n, &[&g])
}

pub fn max_pool(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let k = rng.random_range(2..=3);
    let stride = rng.random_range(1..=2);
    let padding = rng.random_range(0..k);
    let (c, h, w) = (rng.random_range(1..=3), k + rng.random_range(0..5), k + rng.random_range(0..5));
    let x = normal(&[c, h, w], 1.0, &mut rng);
    let (out, arg) = max_pool2d(&x, k, stride, padding).unwrap();
    let r = normal(out.shape(), 1.0, &mut rng);
    let g = max_pool2d_backward(x.shape(), &arg, &r);
    let n = numeric(&x, |m| vec![m], |m| dot(&max_pool2d(m, k, stride, padding).unwrap().0, &r));
    compare(&n, &[&g])
}

pub fn softmax_op(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let len = rng.random_range(2..=10);
    let x = normal(&[len], 3.0, &mut rng);
    let r = normal(&[len], 1.0, &mut rng);
    let g = Tensor::vector(softmax_backward(&softmax(x.data()), r.data()));
    let n = numeric(&x, |m| vec![m], |m| dot(&Tensor::vector(softmax(m.data())), &r));
    compare(&n, &[&g])
}

pub fn softmax_rows_op(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let shape = [rng.random_range(1..=5), rng.random_range(2..=6)];
    let x = normal(&shape, 3.0, &mut rng);
    let r = normal(&shape, 1.0, &mut rng);
    let g = softmax_rows_backward(&softmax_rows(&x), &r);
    let n = numeric(&x, |m| vec![m], |m| dot(&softmax_rows(m), &r));
    compare(&n, &[&g])
}

pub fn bce(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let x = normal(&[2], 3.0, &mut rng);
    let label = rng.random_bool(0.5);
    let g = Tensor::vector(bce_loss([x.data()[0], x.data()[1]], label).1.to_vec());
    let n = numeric(&x, |m| vec![m], |m| bce_loss([m.data()[0], m.data()[1]], label).0);
    compare(&n, &[&g])
}

pub fn bce_batch(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let b = rng.random_range(1..=8);
    let x = normal(&[b, 2], 3.0, &mut rng);
    let labels: Vec<bool> = (0..b).map(|_| rng.random_bool(0.5)).collect();
    let g = bce_loss_batch(&x, &labels).unwrap().1;
    let n = numeric(&x, |m| vec![m], |m| bce_loss_batch(m, &labels).unwrap().0);
    compare(&n, &[&g])
}

pub fn instance_embedding(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let k = rng.random_range(2..=8);
    let x = normal(&[k], 3.0, &mut rng);
    let domain = rng.random_range(0..k);
    let g = Tensor::vector(instance_embedding_loss(x.data(), domain).unwrap().1);
    let n = numeric(&x, |m| vec![m], |m| instance_embedding_loss(m.data(), domain).unwrap().0);
    compare(&n, &[&g])
}

fn positions<R: Rng>(rng: &mut R) -> (usize, usize) {
    (rng.random_range(2..=4), rng.random_range(2..=4))
}

fn mlp_tensors(m: &mut CrossMlp<f64>) -> Vec<&mut Tensor<f64>> {
    vec![&mut m.l1.weight, &mut m.l1.bias, &mut m.l2.weight, &mut m.l2.bias]
}

pub fn cross_attend(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let (h, w) = positions(&mut rng);
    let (c, n) = (rng.random_range(1..=4), h * w);
    let mut mlp = CrossMlp::random(n, 1.0 / (n as f64).sqrt(), &mut rng);
    randomize(vec![&mut mlp.l1.bias, &mut mlp.l2.bias], 0.3, &mut rng);
    let model = (normal(&[n], 1.0, &mut rng), normal(&[c, h, w], 1.0, &mut rng), mlp);
    let (out, cache) = cross_attend_forward(&model.0, &model.1, &model.2).unwrap();
    let r = normal(out.shape(), 1.0, &mut rng);
    let mut g = cross_attend_backward(&model.0, &model.1, &model.2, &cache, &r).unwrap();
    let n = numeric(
        &model,
        |m| {
            let mut v = vec![&mut m.0, &mut m.1];
            v.extend(mlp_tensors(&mut m.2));
            v
        },
        |m| dot(&cross_attend_forward(&m.0, &m.1, &m.2).unwrap().0, &r),
    );
    let mut analytic = vec![&g.query, &g.ctx];
    let mlp_g = mlp_tensors(&mut g.mlp);
    analytic.extend(mlp_g.into_iter().map(|t| &*t));
    compare(&n, &analytic)
}

pub fn self_attend(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let (h, w) = positions(&mut rng);
    let c = [2, 4, 8, 16][rng.random_range(0..4)];
    let mut att = SelfAttention::random(c, 1.0 / (c as f64).sqrt(), &mut rng);
    randomize(vec![&mut att.gamma], 1.0, &mut rng);
    let model = (normal(&[c, h, w], 1.0, &mut rng), att);
    let (out, cache) = self_attend_forward(&model.0, &model.1).unwrap();
    let r = normal(out.shape(), 1.0, &mut rng);
    let g = self_attend_backward(&model.0, &model.1, &cache, &r).unwrap();
    let n = numeric(
        &model,
        |m| vec![&mut m.0, &mut m.1.w_h, &mut m.1.w_g, &mut m.1.w_o, &mut m.1.w_p, &mut m.1.gamma],
        |m| dot(&self_attend_forward(&m.0, &m.1).unwrap().0, &r),
    );
    let gw = &g.weights;
    compare(&n, &[&g.input, &gw.w_h, &gw.w_g, &gw.w_o, &gw.w_p, &gw.gamma])
}

pub fn cmt(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let (h, w) = positions(&mut rng);
    let c = [2, 4, 8][rng.random_range(0..3)];
    let mut weights = CmtWeights::random(c, h * w, &mut rng);
    randomize(weights.params_mut(), 0.3, &mut rng);
    let model = (normal(&[c, h, w], 0.5, &mut rng), normal(&[c, h, w], 0.5, &mut rng), weights);
    let (out, cache) = cmt_forward(&model.0, &model.1, &model.2).unwrap();
    let r = normal(out.shape(), 1.0, &mut rng);
    let g = cmt_backward(&model.0, &model.1, &model.2, &cache, &r).unwrap();
    let n = numeric(
        &model,
        |m| {
            let mut v = vec![&mut m.0, &mut m.1];
            v.extend(m.2.params_mut());
            v
        },
        |m| dot(&cmt_forward(&m.0, &m.1, &m.2).unwrap().0, &r),
    );
    let mut analytic = vec![&g.fv, &g.fe];
    analytic.extend(g.weights.params().into_iter().map(|(_, t)| t));
    compare(&n, &analytic)
}

/// Every middle-fusion mode, with random parameters.
pub fn middle(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let modes = [MiddleMode::Concat, MiddleMode::Add, MiddleMode::Conv1x1, MiddleMode::ChannelAttention, MiddleMode::SpatialAttention];
    modes
        .iter()
        .map(|&mode| {
            let (h, w) = positions(&mut rng);
            let c = rng.random_range(1..=4);
            let mut fusion = MiddleFusion::new(mode, c);
            randomize(fusion.params_mut(), 0.5, &mut rng);
            let model = (normal(&[c, h, w], 1.0, &mut rng), normal(&[c, h, w], 1.0, &mut rng), fusion);
            let (out, cache) = middle_forward(&model.0, &model.1, &model.2).unwrap();
            let r = normal(&[out.len()], 1.0, &mut rng).reshape(out.shape()).unwrap();
            let r2 = r.clone().reshape(&[mode.output_channels(c), h * w]).unwrap();
            let g = middle_backward(&model.0, &model.1, &model.2, &cache, &r2).unwrap();
            let n = numeric(
                &model,
                |m| {
                    let mut v = vec![&mut m.0, &mut m.1];
                    v.extend(m.2.params_mut());
                    v
                },
                |m| dot(&middle_forward(&m.0, &m.1, &m.2).unwrap().0, &r),
            );
            let mut analytic = vec![&g.fv, &g.fe];
            analytic.extend(g.params.params().into_iter().map(|(_, t)| t));
            compare(&n, &analytic)
        })
        .fold(0.0, f64::max)
}

/// Classifier followed by the summed two-way cross-entropy.
pub fn classifier(seed: u64) -> f64 {
    let mut rng = super::rng(seed);
    let (b, d, hidden) = (rng.random_range(1..=5), rng.random_range(4..=12), rng.random_range(3..=8));
    let mut net = Classifier::new(d, hidden, &mut rng);
    randomize(net.params_mut(), 0.5, &mut rng);
    let model = (normal(&[b, d], 1.0, &mut rng), net);
    let labels: Vec<bool> = (0..b).map(|_| rng.random_bool(0.5)).collect();
    let loss = |m: &(Tensor<f64>, Classifier<f64>)| bce_loss_batch(&m.1.forward(&m.0).unwrap(), &labels).unwrap().0;
    let (logits, cache) = model.1.forward_cached(&model.0).unwrap();
    let (_, g_logits) = bce_loss_batch(&logits, &labels).unwrap();
    let (gx, gp) = model.1.backward(&cache, &g_logits).unwrap();
    let n = numeric(
        &model,
        |m| {
            let mut v = vec![&mut m.0];
            v.extend(m.1.params_mut());
            v
        },
        loss,
    );
    let mut analytic = vec![&gx];
    analytic.extend(gp.params().into_iter().map(|(_, t)| t));
    compare(&n, &analytic)
}
