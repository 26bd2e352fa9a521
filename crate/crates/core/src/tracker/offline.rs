//! Offline multi-domain training: shared fusion + hidden layers, one output
//! layer per training sequence, trained with per-domain cross-entropy plus
//! an instance-embedding term that separates positives across domains.
//! The backbone stays frozen.

use rand::Rng;

use super::model::{FrameMaps, Head, TrackerModel};
use super::sampling::{collect_samples, ImageSize, SampleLabel, SampleSource};
use super::{stream_rng, RngStream, TrackerError};
use crate::bbox::BBox;
use crate::fusion::FeatureFusion;
use crate::nn::linear::Linear;
use crate::nn::loss::{bce_loss_batch, instance_embedding_loss};
use crate::nn::optim::{clip_grad_norm, Parameterized, Sgd, SgdConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Precomputed backbone maps and boxes for one training sequence.
#[derive(Debug, Clone)]
pub struct DomainSequence<T> {
    pub maps: Vec<FrameMaps<T>>,
    pub boxes: Vec<BBox>,
    pub image: ImageSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineConfig {
    pub epochs: usize,
    /// frames per minibatch
    pub batch_frames: usize,
    pub pos_per_frame: usize,
    pub neg_per_frame: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,
    /// weight of the instance-embedding term
    pub embedding_weight: f64,
    pub seed: u64,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_frames: 8,
            pos_per_frame: 4,
            neg_per_frame: 12,
            lr: 0.0001,
            momentum: 0.9,
            weight_decay: 0.0005,
            grad_clip: 10.0,
            embedding_weight: 0.1,
            seed: 0,
        }
    }
}

/// Trainable state: shared layers and one `hidden→2` layer per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomain<T> {
    pub fusion: Option<FeatureFusion<T>>,
    pub fc4: Linear<T>,
    pub fc5: Linear<T>,
    pub domains: Vec<Linear<T>>,
}

impl<T: Scalar> Parameterized<T> for MultiDomain<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut p = vec![
            ("fc4.weight".to_string(), &self.fc4.weight),
            ("fc4.bias".to_string(), &self.fc4.bias),
            ("fc5.weight".to_string(), &self.fc5.weight),
            ("fc5.bias".to_string(), &self.fc5.bias),
        ];
        for (d, l) in self.domains.iter().enumerate() {
            p.push((format!("domain{d}.weight"), &l.weight));
            p.push((format!("domain{d}.bias"), &l.bias));
        }
        if let Some(f) = &self.fusion {
            p.extend(f.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = vec![&mut self.fc4.weight, &mut self.fc4.bias, &mut self.fc5.weight, &mut self.fc5.bias];
        for l in &mut self.domains {
            p.push(&mut l.weight);
            p.push(&mut l.bias);
        }
        if let Some(f) = &mut self.fusion {
            p.extend(f.params_mut());
        }
        p
    }
}

/// Mean loss per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineReport {
    pub epoch_losses: Vec<f64>,
}

fn relu<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    t.map(|v| v.max(T::zero()))
}

fn masked<T: Scalar>(pre: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>, TrackerError> {
    Ok(pre.zip_map(g, |x, g| if x > T::zero() { g } else { T::zero() })?)
}

/// Trains the shared part of `model`'s head on `sequences` and writes it
/// back; the head's output layer is left untouched for online re-training.
pub fn train_offline<T: Scalar>(
    model: &mut TrackerModel<T>,
    sequences: &[DomainSequence<T>],
    cfg: &OfflineConfig,
) -> Result<OfflineReport, TrackerError> {
    if sequences.is_empty() || sequences.iter().any(|s| s.maps.is_empty() || s.maps.len() != s.boxes.len()) {
        return Err(TrackerError::Input("offline training needs non-empty sequences with one box per frame".into()));
    }
    let (classifier, fusion) = match &model.head {
        Head::Early { classifier, .. } => (classifier.clone(), None),
        Head::Fused { classifier, fusion } => (classifier.clone(), Some(fusion.clone())),
        Head::Late { .. } => return Err(TrackerError::Input("offline training needs a single classifier head".into())),
    };
    let hidden = classifier.fc5.out_dim();
    let mut init_rng = stream_rng(cfg.seed, RngStream::Classifier);
    let mut state = MultiDomain {
        fusion,
        fc4: classifier.fc4,
        fc5: classifier.fc5,
        domains: (0..sequences.len()).map(|_| Linear::normal(hidden, 2, 0.01, &mut init_rng)).collect(),
    };
    let mut optim = Sgd::new(&state, SgdConfig { lr: cfg.lr, momentum: cfg.momentum, weight_decay: cfg.weight_decay });
    let mut rng = stream_rng(cfg.seed, RngStream::Sampling);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        let mut total = 0.0;
        for (d, seq) in sequences.iter().enumerate() {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for _ in 0..cfg.batch_frames {
                let f = rng.random_range(0..seq.maps.len());
                let gt = seq.boxes[f];
                let gauss = SampleSource::Gaussian { trans_sigma: 0.1, scale_sigma: 0.05 };
                let uniform = SampleSource::Uniform { trans_range: 1.0, scale_range: 0.5 };
                for b in collect_samples(gauss, SampleLabel::Positive, cfg.pos_per_frame, &gt, 0.7, 0.3, 10, seq.image, &mut rng)? {
                    pos.push((&seq.maps[f], b));
                }
                for b in collect_samples(uniform, SampleLabel::Negative, cfg.neg_per_frame, &gt, 0.7, 0.3, 10, seq.image, &mut rng)? {
                    neg.push((&seq.maps[f], b));
                }
            }
            total += step(model, &mut state, &mut optim, d, &pos, &neg, cfg)?;
        }
        epoch_losses.push(total / sequences.len() as f64);
    }

    match &mut model.head {
        Head::Early { classifier, .. } => {
            classifier.fc4 = state.fc4;
            classifier.fc5 = state.fc5;
        }
        Head::Fused { classifier, fusion } => {
            classifier.fc4 = state.fc4;
            classifier.fc5 = state.fc5;
            if let Some(f) = state.fusion {
                *fusion = f;
            }
        }
        Head::Late { .. } => unreachable!("rejected above"),
    }
    Ok(OfflineReport { epoch_losses })
}

fn step<T: Scalar>(
    model: &TrackerModel<T>,
    state: &mut MultiDomain<T>,
    optim: &mut Sgd<T>,
    domain: usize,
    pos: &[(&FrameMaps<T>, BBox)],
    neg: &[(&FrameMaps<T>, BBox)],
    cfg: &OfflineConfig,
) -> Result<f64, TrackerError> {
    let samples: Vec<_> = pos.iter().chain(neg).cloned().collect();
    let labels: Vec<bool> = (0..samples.len()).map(|i| i < pos.len()).collect();
    let mut probe = model.clone();
    if let (Head::Fused { fusion, .. }, Some(f)) = (&mut probe.head, &state.fusion) {
        *fusion = f.clone();
    }
    let feats = probe.flat_features(&samples)?;

    let h4_pre = state.fc4.forward(&feats.x)?;
    let h4 = relu(&h4_pre);
    let h5_pre = state.fc5.forward(&h4)?;
    let h5 = relu(&h5_pre);
    let logits = state.domains[domain].forward(&h5)?;
    let (bce, g_logits) = bce_loss_batch(&logits, &labels)?;
    let mut grads = state.zeros_like();
    let (mut g_h5, g_dom) = state.domains[domain].backward(&h5, &g_logits)?;
    grads.domains[domain] = g_dom;

    // positive-class score of every positive under every domain head
    let w = T::of(cfg.embedding_weight);
    let mut embed = T::zero();
    let pos_rows = Tensor::new(vec![pos.len(), h5.dim(1)], h5.data()[..pos.len() * h5.dim(1)].to_vec())?;
    let all: Vec<Tensor<T>> = state.domains.iter().map(|l| l.forward(&pos_rows)).collect::<Result<_, _>>()?;
    let mut g_scores = vec![Tensor::<T>::zeros(&[pos.len(), 2]); state.domains.len()];
    for i in 0..pos.len() {
        let scores: Vec<T> = all.iter().map(|l| l.data()[i * 2 + 1]).collect();
        let (loss, g) = instance_embedding_loss(&scores, domain).map_err(|e| TrackerError::Input(e.to_string()))?;
        embed += loss;
        for (k, gk) in g.into_iter().enumerate() {
            g_scores[k].data_mut()[i * 2 + 1] = gk * w;
        }
    }
    let hdim = h5.dim(1);
    for (k, l) in state.domains.iter().enumerate() {
        let (g_rows, gl) = l.backward(&pos_rows, &g_scores[k])?;
        for (a, &b) in g_h5.data_mut()[..pos.len() * hdim].iter_mut().zip(g_rows.data()) {
            *a += b;
        }
        grads.domains[k].weight.axpy(T::one(), &gl.weight)?;
        grads.domains[k].bias.axpy(T::one(), &gl.bias)?;
    }

    let (g_h4, g5) = state.fc5.backward(&h4, &masked(&h5_pre, &g_h5)?)?;
    let (g_x, g4) = state.fc4.backward(&feats.x, &masked(&h4_pre, &g_h4)?)?;
    grads.fc4 = g4;
    grads.fc5 = g5;
    if let (Some(fusion), Some(gf), Some((rois, caches))) = (&state.fusion, &mut grads.fusion, &feats.fused) {
        for (i, ((v, e), c)) in rois.iter().zip(caches).enumerate() {
            let gi = fusion.backward(v, e, c, &Tensor::vector(g_x.row(i).to_vec()))?;
            for (acc, (_, t)) in gf.params_mut().into_iter().zip(gi.params()) {
                acc.axpy(T::one(), t)?;
            }
        }
    }
    clip_grad_norm(&mut grads.params_mut(), cfg.grad_clip);
    optim.step(state, &grads, &[])?;
    Ok((bce + w * embed).f64())
}
