//! Online tracking by binary classification of sampled boxes.
//!
//! The first frame trains a classifier on positives and negatives drawn
//! around the initial box. Each later frame scores Gaussian proposals around
//! the previous result, averages the best few, and feeds confident results
//! back into a bounded sample memory used by periodic and failure-triggered
//! updates. The backbone stays frozen; classifier (and optionally fusion)
//! weights train online.

pub mod classifier;
pub mod memory;
pub mod model;
pub mod offline;
pub mod roi;
pub mod sampling;

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use classifier::Classifier;
pub use memory::SampleMemory;
pub use model::{FrameMaps, Head, TrackerModel, ROI_SIZE};
pub use roi::roi_align;
pub use sampling::{
    collect_samples, label_samples, sample_proposals, top_k_indices, ImageSize, SampleLabel, SampleSource,
};

use crate::bbox::BBox;
use crate::config::{ConfigError, FusionInit, RunConfig};
use crate::event::{EventError, EventStream};
use crate::frames::FrameSequence;
use crate::fusion::{CmtWeights, FeatureFusion, FusionStrategy, EarlyMode};
use crate::nn::backbone::{Backbone, BackboneSpec};
use crate::nn::optim::{Sgd, SgdConfig};
use crate::nn::weights::{parse_weight_file, WeightFileError};
use crate::repr::{preprocess_frame, stack_events, to_network_tensor};
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackerError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Weights(#[from] WeightFileError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("box {0:?} does not overlap the image")]
    BoxOutside(BBox),
    #[error("invalid box {0:?}")]
    InvalidBox(BBox),
    #[error("degenerate image size {width}×{height}")]
    ImageSize { width: f64, height: f64 },
    #[error("only {got} of {wanted} {label:?} samples after oversampling")]
    InsufficientSamples { label: SampleLabel, wanted: usize, got: usize },
    #[error("tracker used before initialisation")]
    Uninitialized,
    #[error("{0}")]
    Input(String),
}

/// Independent random streams so that, e.g., fusion initialisation never
/// shifts the classifier weights or the sampled boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Backbone = 0,
    Fusion = 1,
    Classifier = 2,
    Sampling = 3,
}

pub fn stream_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Negatives near the target are drawn within this many box sizes.
const NEG_RANGE_INIT: f64 = 1.0;
const NEG_RANGE_UPDATE: f64 = 2.0;
const NEG_SCALE_RANGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateTrigger {
    Periodic,
    Failure,
}

/// Backbone named by `config.backbone`: `handcrafted`, `random` or a weight file path.
pub fn build_backbone<T: Scalar>(config: &RunConfig) -> Result<Backbone<T>, TrackerError> {
    let in_channels = match config.fusion {
        FusionStrategy::Early(EarlyMode::Concat) => 6,
        _ => 3,
    };
    let spec = BackboneSpec::with_widths(in_channels, config.backbone_widths);
    match config.backbone.as_str() {
        "handcrafted" => Ok(Backbone::handcrafted(spec)),
        "random" => Ok(Backbone::random(spec, &mut stream_rng(config.seed, RngStream::Backbone))),
        path => {
            let bytes = std::fs::read(Path::new(path))
                .map_err(|e| TrackerError::Input(format!("reading backbone weights {path}: {e}")))?;
            Ok(Backbone::from_weights(spec, &parse_weight_file(&bytes)?)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracker<T> {
    config: RunConfig,
    model: TrackerModel<T>,
    optim: Sgd<T>,
    lr_scales: Vec<f64>,
    memory: SampleMemory<T>,
    rng: ChaCha8Rng,
    image: ImageSize,
    prev: Option<BBox>,
    frame: usize,
    last_score: f64,
    last_update: Option<UpdateTrigger>,
    last_maps: Option<Arc<FrameMaps<T>>>,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(config: RunConfig, backbone: Backbone<T>) -> Result<Self, TrackerError> {
        config.validate()?;
        let channels = backbone.spec().out_channels();
        let n = ROI_SIZE * ROI_SIZE;
        let fusion = match (config.fusion, config.fusion_init) {
            (FusionStrategy::Cmt, FusionInit::Zero) => Some(FeatureFusion::Cmt(CmtWeights::zeros(channels, n))),
            (s, _) => FeatureFusion::new(s, channels, n, &mut stream_rng(config.seed, RngStream::Fusion)),
        };
        let head = Head::new(
            config.fusion,
            channels,
            config.classifier_hidden,
            fusion,
            &mut stream_rng(config.seed, RngStream::Classifier),
        )?;
        let model = TrackerModel { backbone, head, modality: config.modality };
        let optim = Sgd::new(
            &model.head,
            SgdConfig { lr: config.lr_online, momentum: config.momentum, weight_decay: config.weight_decay },
        );
        Ok(Self {
            lr_scales: model.head.lr_scales(if config.train_fusion { config.fusion_lr_scale } else { 0.0 }),
            memory: SampleMemory::new(config.long_term, config.neg_memory),
            rng: stream_rng(config.seed, RngStream::Sampling),
            model,
            optim,
            image: (0.0, 0.0),
            prev: None,
            frame: 0,
            last_score: 0.0,
            last_update: None,
            last_maps: None,
            config,
        })
    }

    pub fn from_config(config: RunConfig) -> Result<Self, TrackerError> {
        let backbone = build_backbone(&config)?;
        Self::new(config, backbone)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn model(&self) -> &TrackerModel<T> {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut TrackerModel<T> {
        &mut self.model
    }

    pub fn memory(&self) -> &SampleMemory<T> {
        &self.memory
    }

    pub fn previous_box(&self) -> Option<BBox> {
        self.prev
    }

    /// Index of the last processed frame (0 after initialisation).
    pub fn frame_index(&self) -> usize {
        self.frame
    }

    pub fn last_update(&self) -> Option<UpdateTrigger> {
        self.last_update
    }

    /// Positive-class scores of `boxes` on the most recent frame.
    pub fn score_boxes(&self, boxes: &[BBox]) -> Result<Vec<T>, TrackerError> {
        let maps = self.last_maps.as_ref().ok_or(TrackerError::Uninitialized)?;
        let samples: Vec<_> = boxes.iter().map(|b| (maps.as_ref(), *b)).collect();
        self.model.scores(&samples)
    }

    /// Scores `proposals` on the most recent frame and returns the clipped
    /// mean of the `top_k` best with the best score.
    pub fn locate(&self, proposals: &[BBox]) -> Result<(BBox, f64), TrackerError> {
        let maps = self.last_maps.as_ref().ok_or(TrackerError::Uninitialized)?;
        self.select(maps, proposals)
    }

    fn select(&self, maps: &FrameMaps<T>, proposals: &[BBox]) -> Result<(BBox, f64), TrackerError> {
        if proposals.is_empty() {
            return Err(TrackerError::Input("no proposals".into()));
        }
        let samples: Vec<_> = proposals.iter().map(|b| (maps, *b)).collect();
        let scores = self.model.scores(&samples)?;
        let top = top_k_indices(&scores, self.config.top_k);
        let chosen: Vec<BBox> = top.iter().map(|&i| proposals[i]).collect();
        let result = BBox::mean(&chosen).expect("top_k >= 1").clip_to(self.image.0, self.image.1, 1.0);
        Ok((result, scores[top[0]].f64()))
    }

    fn image_size(frame: &Tensor<T>) -> Result<ImageSize, TrackerError> {
        if frame.ndim() != 3 || frame.dim(1) == 0 || frame.dim(2) == 0 {
            return Err(TrackerError::Input(format!("expected a C×H×W frame, got {:?}", frame.shape())));
        }
        Ok((frame.dim(2) as f64, frame.dim(1) as f64))
    }

    fn negatives(&mut self, n: usize, around: &BBox, range: f64, whole: bool) -> Result<Vec<BBox>, TrackerError> {
        let c = &self.config;
        let (pos_iou, neg_iou, over, image) = (c.pos_iou, c.neg_iou, c.oversample, self.image);
        let uniform = SampleSource::Uniform { trans_range: range, scale_range: NEG_SCALE_RANGE };
        let n_whole = if whole { n / 2 } else { 0 };
        let mut out =
            collect_samples(uniform, SampleLabel::Negative, n - n_whole, around, pos_iou, neg_iou, over, image, &mut self.rng)?;
        if n_whole > 0 {
            out.extend(collect_samples(
                SampleSource::Whole,
                SampleLabel::Negative,
                n_whole,
                around,
                pos_iou,
                neg_iou,
                over,
                image,
                &mut self.rng,
            )?);
        }
        Ok(out)
    }

    fn positives(&mut self, n: usize, around: &BBox) -> Result<Vec<BBox>, TrackerError> {
        let c = &self.config;
        let src = SampleSource::Gaussian { trans_sigma: c.pos_trans_sigma, scale_sigma: c.pos_scale_sigma };
        collect_samples(src, SampleLabel::Positive, n, around, c.pos_iou, c.neg_iou, c.oversample, self.image, &mut self.rng)
    }

    /// Trains on the first frame and returns the score of `gt`.
    pub fn init(&mut self, frame: &Tensor<T>, events: &Tensor<T>, gt: BBox) -> Result<f64, TrackerError> {
        self.image = Self::image_size(frame)?;
        if !gt.is_valid() {
            return Err(TrackerError::InvalidBox(gt));
        }
        if gt.intersection_area(&BBox::new(0.0, 0.0, self.image.0, self.image.1)) <= 0.0 {
            return Err(TrackerError::BoxOutside(gt));
        }
        let maps = Arc::new(self.model.frame_maps(frame, events)?);
        let pos = self.positives(self.config.n_pos_init, &gt)?;
        let neg = self.negatives(self.config.n_neg_init, &gt, NEG_RANGE_INIT, true)?;
        self.memory = SampleMemory::new(self.config.long_term, self.config.neg_memory);
        self.memory.push_positives(0, maps.clone(), pos);
        self.memory.push_negatives(0, maps.clone(), neg);
        self.train(self.config.init_iters, usize::MAX)?;
        self.prev = Some(gt);
        self.frame = 0;
        self.last_update = None;
        self.last_maps = Some(maps);
        let score = self.score_boxes(&[gt])?[0].f64();
        self.last_score = score;
        Ok(score)
    }

    /// Locates the target in the next frame. Returns the box and the best
    /// positive-class score.
    pub fn track(&mut self, frame: &Tensor<T>, events: &Tensor<T>) -> Result<(BBox, f64), TrackerError> {
        let prev = self.prev.ok_or(TrackerError::Uninitialized)?;
        if Self::image_size(frame)? != self.image {
            return Err(TrackerError::Input("frame size changed mid-sequence".into()));
        }
        self.frame += 1;
        let maps = Arc::new(self.model.frame_maps(frame, events)?);
        let c = &self.config;
        let proposals = sample_proposals(&prev, c.n_proposals, c.trans_sigma, c.scale_sigma, self.image, &mut self.rng)?;
        let (result, score) = self.select(&maps, &proposals)?;
        let success = score > 0.0;
        log::debug!("frame {}: box {:?} score {:.4}", self.frame, result, score);

        if success {
            self.prev = Some(result);
            let pos = self.positives(self.config.n_pos_update, &result);
            let neg = self.negatives(self.config.n_neg_update, &result, NEG_RANGE_UPDATE, false);
            match (pos, neg) {
                (Ok(pos), Ok(neg)) => {
                    self.memory.push_positives(self.frame, maps.clone(), pos);
                    self.memory.push_negatives(self.frame, maps.clone(), neg);
                }
                (Err(e), _) | (_, Err(e)) => log::debug!("frame {}: skipping sample collection: {e}", self.frame),
            }
        }

        self.last_update = if !success {
            self.train(self.config.update_iters, self.config.short_term)?;
            Some(UpdateTrigger::Failure)
        } else if self.frame % self.config.update_interval == 0 {
            self.train(self.config.update_iters, usize::MAX)?;
            Some(UpdateTrigger::Periodic)
        } else {
            None
        };
        self.last_score = score;
        self.last_maps = Some(maps);
        Ok((result, score))
    }

    /// `iters` minibatch steps over the most recent `last` memory frames
    /// (negatives also capped by their own capacity), mining hard negatives.
    fn train(&mut self, iters: usize, last: usize) -> Result<(), TrackerError> {
        let (pos, neg) = (self.memory.positives(last), self.memory.negatives(last));
        if pos.is_empty() || neg.is_empty() {
            return Ok(());
        }
        let c = &self.config;
        let (batch_pos, batch_neg, pool) = (c.batch_pos, c.batch_neg, c.batch_neg * c.hard_neg_factor);
        let mut pos_order = CyclicSampler::new(pos.len(), &mut self.rng);
        let mut neg_order = CyclicSampler::new(neg.len(), &mut self.rng);
        for it in 0..iters {
            let pos_batch: Vec<_> = pos_order.next(batch_pos, &mut self.rng).into_iter().map(|i| pos[i]).collect();
            let pool_batch: Vec<_> = neg_order.next(pool, &mut self.rng).into_iter().map(|i| neg[i]).collect();
            let pool_scores = self.model.scores(&pool_batch)?;
            let hard: Vec<_> = top_k_indices(&pool_scores, batch_neg).into_iter().map(|i| pool_batch[i]).collect();
            let loss = self.model.train_step(&pos_batch, &hard, &mut self.optim, &self.lr_scales, c.grad_clip)?;
            log::trace!("iter {it}: loss {loss:.5}");
        }
        Ok(())
    }
}

/// Walks a shuffled index order, reshuffling each time it wraps.
struct CyclicSampler {
    order: Vec<usize>,
    pos: usize,
}

impl CyclicSampler {
    fn new<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order, pos: 0 }
    }

    fn next<R: Rng>(&mut self, k: usize, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Network inputs for frame `i`: the preprocessed frame and the event image
/// of `[t_i, t_{i+1})` (the last frame takes every later event).
pub fn frame_inputs<T: Scalar>(
    frames: &FrameSequence,
    events: &EventStream,
    i: usize,
) -> Result<(Tensor<T>, Tensor<T>), TrackerError> {
    let t0 = frames.timestamps[i];
    let t1 = frames.timestamps.get(i + 1).copied().unwrap_or(u64::MAX);
    let img = stack_events(events, t0, t1)?;
    Ok((preprocess_frame(&frames.frames[i]), to_network_tensor(&img)))
}

/// Tracks a whole sequence from `init`. The first entry is `init` with its
/// score after training.
pub fn track_sequence<T: Scalar>(
    config: &RunConfig,
    frames: &FrameSequence,
    events: &EventStream,
    init: BBox,
) -> Result<Vec<(BBox, f64)>, TrackerError> {
    let res = frames.resolution().ok_or_else(|| TrackerError::Input("empty frame sequence".into()))?;
    if res != events.resolution() {
        return Err(TrackerError::Input(format!(
            "frame resolution {:?} differs from event resolution {:?}",
            res,
            events.resolution()
        )));
    }
    if frames.timestamps.len() != frames.frames.len() {
        return Err(TrackerError::Input("timestamp count differs from frame count".into()));
    }
    let mut tracker = Tracker::<T>::from_config(config.clone())?;
    let mut out = Vec::with_capacity(frames.frames.len());
    let (f, e) = frame_inputs(frames, events, 0)?;
    out.push((init, tracker.init(&f, &e, init)?));
    for i in 1..frames.frames.len() {
        let (f, e) = frame_inputs(frames, events, i)?;
        out.push(tracker.track(&f, &e)?);
    }
    Ok(out)
}
