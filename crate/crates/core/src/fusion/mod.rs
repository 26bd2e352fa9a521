//! Fusion of the visible and event branches at input, feature or score level.

pub mod cmt;
pub mod early;
pub mod late;
pub mod middle;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use cmt::{
    attention_dim, base_vector, cmt_backward, cmt_forward, cmt_fuse, cross_attend, cross_attend_backward,
    cross_attend_forward, self_attend, self_attend_backward, self_attend_forward, CmtCache, CmtGrads, CmtWeights,
    CrossMlp, SelfAttention,
};
pub use early::{early_fuse, EarlyMode};
pub use late::late_fuse;
pub use middle::{middle_backward, middle_forward, middle_fuse, MiddleCache, MiddleFusion, MiddleGrads, MiddleMode};

use crate::nn::optim::Parameterized;
use crate::scalar::Scalar;
use crate::tensor::{ShapeError, Tensor};

/// Every selectable strategy, named as in run configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FusionStrategy {
    Early(EarlyMode),
    Middle(MiddleMode),
    Cmt,
    LateAverage,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 9] = [
        FusionStrategy::Early(EarlyMode::Add),
        FusionStrategy::Early(EarlyMode::Concat),
        FusionStrategy::Middle(MiddleMode::Concat),
        FusionStrategy::Middle(MiddleMode::Add),
        FusionStrategy::Middle(MiddleMode::Conv1x1),
        FusionStrategy::Middle(MiddleMode::ChannelAttention),
        FusionStrategy::Middle(MiddleMode::SpatialAttention),
        FusionStrategy::Cmt,
        FusionStrategy::LateAverage,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FusionStrategy::Early(EarlyMode::Add) => "early.add",
            FusionStrategy::Early(EarlyMode::Concat) => "early.concat",
            FusionStrategy::Middle(MiddleMode::Concat) => "mid.concat",
            FusionStrategy::Middle(MiddleMode::Add) => "mid.add",
            FusionStrategy::Middle(MiddleMode::Conv1x1) => "mid.conv1x1",
            FusionStrategy::Middle(MiddleMode::ChannelAttention) => "mid.catt",
            FusionStrategy::Middle(MiddleMode::SpatialAttention) => "mid.satt",
            FusionStrategy::Cmt => "cmt",
            FusionStrategy::LateAverage => "late.average",
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown fusion strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for FusionStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// Views a `C×…` tensor as `C` rows of `N` positions.
pub(crate) fn feature_dims<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<(usize, usize), ShapeError> {
    if t.ndim() < 2 || t.is_empty() {
        return Err(ShapeError::new(op, format!("expected a C×N or C×H×W feature map, got {:?}", t.shape())));
    }
    let c = t.dim(0);
    Ok((c, t.len() / c))
}

/// Learned feature-level fusion producing one flat vector per sample.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureFusion<T> {
    Middle(MiddleFusion<T>),
    Cmt(CmtWeights<T>),
}

#[derive(Debug, Clone)]
pub enum FeatureFusionCache<T> {
    Middle(MiddleCache<T>),
    Cmt(CmtCache<T>),
}

impl<T: Scalar> FeatureFusion<T> {
    /// Default initialisation for `c` channels over `n` positions.
    pub fn new<R: Rng>(strategy: FusionStrategy, c: usize, n: usize, rng: &mut R) -> Option<Self> {
        match strategy {
            FusionStrategy::Middle(mode) => Some(FeatureFusion::Middle(MiddleFusion::new(mode, c))),
            FusionStrategy::Cmt => Some(FeatureFusion::Cmt(CmtWeights::random(c, n, rng))),
            _ => None,
        }
    }

    /// Length of the fused vector for `c×n` inputs.
    pub fn output_len(&self, c: usize, n: usize) -> usize {
        match self {
            FeatureFusion::Middle(m) => m.mode().output_channels(c) * n,
            FeatureFusion::Cmt(_) => 2 * c * n,
        }
    }

    pub fn forward(&self, fv: &Tensor<T>, fe: &Tensor<T>) -> Result<(Tensor<T>, FeatureFusionCache<T>), ShapeError> {
        match self {
            FeatureFusion::Middle(m) => {
                let (out, cache) = middle_forward(fv, fe, m)?;
                Ok((out.flatten(), FeatureFusionCache::Middle(cache)))
            }
            FeatureFusion::Cmt(w) => {
                let (out, cache) = cmt_forward(fv, fe, w)?;
                Ok((out, FeatureFusionCache::Cmt(cache)))
            }
        }
    }

    /// Returns the parameter gradients only (inputs are frozen features).
    pub fn backward(
        &self,
        fv: &Tensor<T>,
        fe: &Tensor<T>,
        cache: &FeatureFusionCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Self, ShapeError> {
        match (self, cache) {
            (FeatureFusion::Middle(m), FeatureFusionCache::Middle(c)) => {
                let (ch, n) = feature_dims(fv, "FeatureFusion::backward")?;
                let g = grad_out.clone().reshape(&[m.mode().output_channels(ch), n])?;
                Ok(FeatureFusion::Middle(middle_backward(fv, fe, m, c, &g)?.params))
            }
            (FeatureFusion::Cmt(w), FeatureFusionCache::Cmt(c)) => {
                Ok(FeatureFusion::Cmt(cmt_backward(fv, fe, w, c, grad_out)?.weights))
            }
            _ => Err(ShapeError::new("FeatureFusion::backward", "cache from a different fusion variant")),
        }
    }
}

impl<T: Scalar> Parameterized<T> for FeatureFusion<T> {
    fn params(&self) -> Vec<(String, &Tensor<T>)> {
        match self {
            FeatureFusion::Middle(m) => m.params(),
            FeatureFusion::Cmt(w) => w.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            FeatureFusion::Middle(m) => m.params_mut(),
            FeatureFusion::Cmt(w) => w.params_mut(),
        }
    }
}
