//! Backbone → RoI align → fusion → classifier, with one training step.

use rand::Rng;

use super::classifier::{Classifier, ClassifierCache};
use super::roi::roi_align;
use super::TrackerError;
use crate::bbox::BBox;
use crate::config::Modality;
use crate::fusion::{early_fuse, late_fuse, EarlyMode, FeatureFusion, FeatureFusionCache, FusionStrategy};
use crate::nn::backbone::Backbone;
use crate::nn::loss::bce_loss_batch;
use crate::nn::optim::{clip_grad_norm, Parameterized, Sgd};
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

/// RoI output side length.
pub const ROI_SIZE: usize = 3;

/// Backbone maps for one frame: a single map for early fusion, otherwise
/// the visible and event maps.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMaps<T> {
    pub primary: Tensor<T>,
    pub event: Option<Tensor<T>>,
}

/// Everything trained online.
#[derive(Debug, Clone, PartialEq)]
pub enum Head<T> {
    Early { mode: EarlyMode, classifier: Classifier<T> },
    Fused { fusion: FeatureFusion<T>, classifier: Classifier<T> },
    Late { visible: Classifier<T>, event: Classifier<T> },
}

impl<T: Scalar> Head<T> {
    /// `channels` is the backbone output width.
    pub fn new<R: Rng>(
        strategy: FusionStrategy,
        channels: usize,
        hidden: usize,
        fusion: Option<FeatureFusion<T>>,
        classifier_rng: &mut R,
    ) -> Result<Self, TrackerError> {
        let n = ROI_SIZE * ROI_SIZE;
        Ok(match strategy {
            FusionStrategy::Early(mode) => {
                Head::Early { mode, classifier: Classifier::new(channels * n, hidden, classifier_rng) }
            }
            FusionStrategy::LateAverage => Head::Late {
                visible: Classifier::new(channels * n, hidden, classifier_rng),
                event: Classifier::new(channels * n, hidden, classifier_rng),
            },
            FusionStrategy::Middle(_) | FusionStrategy::Cmt => {
                let fusion = fusion.ok_or_else(|| {
                    TrackerError::Shape(ShapeError::new("Head::new", format!("{strategy} needs fusion parameters")))
                })?;
                let d = fusion.output_len(channels, n);
                Head::Fused { fusion, classifier: Classifier::new(d, hidden, classifier_rng) }
            }
        })
    }

    /// Learning-rate multiplier per parameter: classifier weights always
    /// train, fusion weights at `fusion_scale` (0 freezes them).
    pub fn lr_scales(&self, fusion_scale: f64) -> Vec<f64> {
        match self {
            Head::Fused { fusion, classifier } => {
                let mut s = vec![1.0; classifier.params().len()];
                s.extend(std::iter::repeat_n(fusion_scale, fusion.params().len()));
                s
            }
            _ => vec![1.0; self.params().len()],
        }
    }
}

impl<T: Scalar> Head<T> {
    /// Leading entries of `params()` that belong to classifiers; the rest
    /// are fusion weights.
    pub fn classifier_param_count(&self) -> usize {
        match self {
            Head::Fused { classifier, .. } => classifier.params().len(),
            _ => self.params().len(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for Head<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            Head::Early { classifier, .. } => classifier.params(),
            Head::Fused { fusion, classifier } => {
                let mut p = classifier.params();
                p.extend(fusion.params());
                p
            }
            Head::Late { visible, event } => {
                let mut p: Vec<_> = visible.params().into_iter().map(|(n, t)| (format!("visible.{n}"), t)).collect();
                p.extend(event.params().into_iter().map(|(n, t)| (format!("event.{n}"), t)));
                p
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Head::Early { classifier, .. } => classifier.params_mut(),
            Head::Fused { fusion, classifier } => {
                let mut p = classifier.params_mut();
                p.extend(fusion.params_mut());
                p
            }
            Head::Late { visible, event } => {
                let mut p = visible.params_mut();
                p.extend(event.params_mut());
                p
            }
        }
    }
}

/// Per-sample inputs to the head, kept for the backward pass.
enum Features<T> {
    Single(Tensor<T>),
    Fused { x: Tensor<T>, rois: Vec<(Tensor<T>, Tensor<T>)>, caches: Vec<FeatureFusionCache<T>> },
    Pair(Tensor<T>, Tensor<T>),
}

pub(crate) struct FlatFeatures<T> {
    pub x: Tensor<T>,
    pub fused: Option<(Vec<(Tensor<T>, Tensor<T>)>, Vec<FeatureFusionCache<T>>)>,
}

fn stack_rows<T: Scalar>(rows: Vec<Tensor<T>>) -> Result<Tensor<T>, ShapeError> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(n * d);
    for r in rows {
        if r.len() != d {
            return Err(ShapeError::new("stack_rows", "ragged feature rows"));
        }
        data.extend(r.into_data());
    }
    Tensor::new(vec![n, d], data)
}

#[derive(Debug, Clone)]
pub struct TrackerModel<T> {
    pub backbone: Backbone<T>,
    pub head: Head<T>,
    pub modality: Modality,
}

impl<T: Scalar> TrackerModel<T> {
    pub fn stride(&self) -> usize {
        self.backbone.spec().total_stride()
    }

    /// Backbone maps for a `3×H×W` frame tensor and event tensor.
    pub fn frame_maps(&self, frame: &Tensor<T>, events: &Tensor<T>) -> Result<FrameMaps<T>, TrackerError> {
        if frame.shape() != events.shape() {
            return Err(TrackerError::Shape(ShapeError::new(
                "frame_maps",
                format!("frame {:?} vs events {:?}", frame.shape(), events.shape()),
            )));
        }
        let zeros;
        let (frame, events) = match self.modality {
            Modality::Both => (frame, events),
            Modality::Frame => {
                zeros = Tensor::zeros_like(events);
                (frame, &zeros)
            }
            Modality::Event => {
                zeros = Tensor::zeros_like(frame);
                (&zeros, events)
            }
        };
        Ok(match &self.head {
            Head::Early { mode, .. } => {
                FrameMaps { primary: self.backbone.forward(&early_fuse(frame, events, *mode)?)?, event: None }
            }
            _ => FrameMaps { primary: self.backbone.forward(frame)?, event: Some(self.backbone.forward(events)?) },
        })
    }

    fn rois(&self, maps: &FrameMaps<T>, b: &BBox) -> Result<(Tensor<T>, Option<Tensor<T>>), TrackerError> {
        let s = self.stride();
        let v = roi_align(&maps.primary, b, s, ROI_SIZE)?;
        let e = match &maps.event {
            Some(m) => Some(roi_align(m, b, s, ROI_SIZE)?),
            None => None,
        };
        Ok((v, e))
    }

    fn features(&self, samples: &[(&FrameMaps<T>, BBox)]) -> Result<Features<T>, TrackerError> {
        let mut firsts = Vec::with_capacity(samples.len());
        let mut seconds = Vec::with_capacity(samples.len());
        for (maps, b) in samples {
            let (v, e) = self.rois(maps, b)?;
            firsts.push(v);
            seconds.push(e);
        }
        let missing = || TrackerError::Shape(ShapeError::new("features", "event map missing"));
        Ok(match &self.head {
            Head::Early { .. } => Features::Single(stack_rows(firsts.into_iter().map(|t| t.flatten()).collect())?),
            Head::Late { .. } => {
                let es = seconds.into_iter().map(|e| e.map(|t| t.flatten()).ok_or_else(missing)).collect::<Result<Vec<_>, _>>()?;
                Features::Pair(stack_rows(firsts.into_iter().map(|t| t.flatten()).collect())?, stack_rows(es)?)
            }
            Head::Fused { fusion, .. } => {
                let mut rows = Vec::with_capacity(samples.len());
                let mut rois = Vec::with_capacity(samples.len());
                let mut caches = Vec::with_capacity(samples.len());
                for (v, e) in firsts.into_iter().zip(seconds) {
                    let e = e.ok_or_else(missing)?;
                    let (z, cache) = fusion.forward(&v, &e)?;
                    rows.push(z);
                    caches.push(cache);
                    rois.push((v, e));
                }
                Features::Fused { x: stack_rows(rows)?, rois, caches }
            }
        })
    }

    /// Flattened head inputs for single-classifier heads, with the fusion
    /// inputs and caches when a learned fusion is present.
    pub(crate) fn flat_features(&self, samples: &[(&FrameMaps<T>, BBox)]) -> Result<FlatFeatures<T>, TrackerError> {
        match self.features(samples)? {
            Features::Single(x) => Ok(FlatFeatures { x, fused: None }),
            Features::Fused { x, rois, caches } => Ok(FlatFeatures { x, fused: Some((rois, caches)) }),
            Features::Pair(..) => Err(TrackerError::Input("late fusion has no single feature vector".into())),
        }
    }

    /// `B×2` logits for boxes on (possibly different) frames.
    pub fn logits(&self, samples: &[(&FrameMaps<T>, BBox)]) -> Result<Tensor<T>, TrackerError> {
        if samples.is_empty() {
            return Ok(Tensor::zeros(&[0, 2]));
        }
        let feats = self.features(samples)?;
        Ok(match (&self.head, &feats) {
            (Head::Early { classifier, .. }, Features::Single(x)) => classifier.forward(x)?,
            (Head::Fused { classifier, .. }, Features::Fused { x, .. }) => classifier.forward(x)?,
            (Head::Late { visible, event }, Features::Pair(xv, xe)) => {
                let (lv, le) = (visible.forward(xv)?, event.forward(xe)?);
                Tensor::new(lv.shape().to_vec(), late_fuse(lv.data(), le.data())?)?
            }
            _ => unreachable!("features match head"),
        })
    }

    /// Positive-class logits.
    pub fn scores(&self, samples: &[(&FrameMaps<T>, BBox)]) -> Result<Vec<T>, TrackerError> {
        let l = self.logits(samples)?;
        Ok(l.data().chunks_exact(2).map(|r| r[1]).collect())
    }

    /// One SGD step on summed cross-entropy over `pos` then `neg`, with the
    /// classifier and fusion gradients norm-clipped separately. Returns the
    /// batch loss.
    pub fn train_step(
        &mut self,
        pos: &[(&FrameMaps<T>, BBox)],
        neg: &[(&FrameMaps<T>, BBox)],
        optim: &mut Sgd<T>,
        lr_scales: &[f64],
        grad_clip: f64,
    ) -> Result<f64, TrackerError> {
        let samples: Vec<_> = pos.iter().chain(neg).cloned().collect();
        let labels: Vec<bool> = (0..samples.len()).map(|i| i < pos.len()).collect();
        let feats = self.features(&samples)?;
        let (loss, mut grads) = match (&self.head, feats) {
            (Head::Early { mode, classifier }, Features::Single(x)) => {
                let (l, cache) = classifier.forward_cached(&x)?;
                let (loss, g) = bce_loss_batch(&l, &labels)?;
                let (_, gc) = classifier.backward(&cache, &g)?;
                (loss, Head::Early { mode: *mode, classifier: gc })
            }
            (Head::Late { visible, event }, Features::Pair(xv, xe)) => {
                let (lv, cv) = visible.forward_cached(&xv)?;
                let (le, ce) = event.forward_cached(&xe)?;
                let l = Tensor::new(lv.shape().to_vec(), late_fuse(lv.data(), le.data())?)?;
                let (loss, g) = bce_loss_batch(&l, &labels)?;
                let half = g.scale(T::of(0.5));
                let (_, gv) = visible.backward(&cv, &half)?;
                let (_, ge) = event.backward(&ce, &half)?;
                (loss, Head::Late { visible: gv, event: ge })
            }
            (Head::Fused { fusion, classifier }, Features::Fused { x, rois, caches }) => {
                let (l, cache): (Tensor<T>, ClassifierCache<T>) = classifier.forward_cached(&x)?;
                let (loss, g) = bce_loss_batch(&l, &labels)?;
                let (gx, gc) = classifier.backward(&cache, &g)?;
                let mut gf = fusion.zeros_like();
                let fusion_frozen = lr_scales.iter().skip(classifier.params().len()).all(|&s| s == 0.0);
                if !fusion_frozen && !gf.params().is_empty() {
                    for (i, ((v, e), c)) in rois.iter().zip(&caches).enumerate() {
                        let gi = fusion.backward(v, e, c, &Tensor::vector(gx.row(i).to_vec()))?;
                        for (acc, (_, t)) in gf.params_mut().into_iter().zip(gi.params()) {
                            acc.axpy(T::one(), t)?;
                        }
                    }
                }
                (loss, Head::Fused { fusion: gf, classifier: gc })
            }
            _ => unreachable!("features match head"),
        };
        let head_len = self.head.classifier_param_count();
        let mut g = grads.params_mut();
        let (classifier_grads, fusion_grads) = g.split_at_mut(head_len);
        clip_grad_norm(classifier_grads, grad_clip);
        clip_grad_norm(fusion_grads, grad_clip);
        optim.step(&mut self.head, &grads, lr_scales)?;
        Ok(loss.f64())
    }
}
