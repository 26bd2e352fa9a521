//! Run configuration shared by the tracker and the command-line tool.
//!
//! Loaded from JSON; every key is optional and unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::fusion::FusionStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Both,
    /// event input replaced by zeros
    Frame,
    /// frame input replaced by zeros
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionInit {
    Random,
    Zero,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config JSON: {0}")]
    Json(String),
    #[error("{key}: {msg}")]
    Invalid { key: &'static str, msg: String },
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub theta: f64,
    pub eps: f64,
    #[serde(with = "strategy_name")]
    pub fusion: FusionStrategy,
    pub fusion_init: FusionInit,
    /// train fusion parameters online alongside the classifier
    pub train_fusion: bool,
    /// learning-rate multiplier for fusion parameters when they train
    pub fusion_lr_scale: f64,
    pub modality: Modality,
    /// `handcrafted`, `random`, or a path to a weight file
    pub backbone: String,
    pub backbone_widths: [usize; 3],
    pub seed: u64,
    pub precision: Precision,

    pub n_proposals: usize,
    pub trans_sigma: f64,
    pub scale_sigma: f64,
    pub top_k: usize,

    pub n_pos_init: usize,
    pub n_neg_init: usize,
    pub n_pos_update: usize,
    pub n_neg_update: usize,
    pub pos_trans_sigma: f64,
    pub pos_scale_sigma: f64,
    pub pos_iou: f64,
    pub neg_iou: f64,
    /// candidate draws allowed per requested sample
    pub oversample: usize,

    pub init_iters: usize,
    pub update_iters: usize,
    pub batch_pos: usize,
    pub batch_neg: usize,
    /// hard negatives are mined from `hard_neg_factor * batch_neg` candidates
    pub hard_neg_factor: usize,
    pub classifier_hidden: usize,

    pub lr_online: f64,
    pub lr_offline: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub grad_clip: f64,

    pub update_interval: usize,
    pub long_term: usize,
    pub short_term: usize,
    pub neg_memory: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            theta: 0.2,
            eps: 0.5,
            fusion: FusionStrategy::Cmt,
            fusion_init: FusionInit::Random,
            train_fusion: true,
            fusion_lr_scale: 1.0,
            modality: Modality::Both,
            backbone: "handcrafted".into(),
            backbone_widths: [96, 256, 512],
            seed: 0,
            precision: Precision::F32,
            n_proposals: 256,
            trans_sigma: 0.25,
            scale_sigma: 0.05,
            top_k: 5,
            n_pos_init: 500,
            n_neg_init: 5000,
            n_pos_update: 50,
            n_neg_update: 200,
            pos_trans_sigma: 0.1,
            pos_scale_sigma: 0.05,
            pos_iou: 0.7,
            neg_iou: 0.3,
            oversample: 10,
            init_iters: 50,
            update_iters: 15,
            batch_pos: 32,
            batch_neg: 96,
            hard_neg_factor: 4,
            classifier_hidden: 512,
            lr_online: 0.001,
            lr_offline: 0.0001,
            momentum: 0.9,
            weight_decay: 0.0005,
            grad_clip: 10.0,
            update_interval: 10,
            long_term: 100,
            short_term: 20,
            neg_memory: 30,
        }
    }
}

mod strategy_name {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::fusion::FusionStrategy;

    pub fn serialize<S: Serializer>(s: &FusionStrategy, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<FusionStrategy, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(D::Error::custom)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("theta", self.theta),
            ("eps", self.eps),
            ("lr_online", self.lr_online),
            ("lr_offline", self.lr_offline),
            ("grad_clip", self.grad_clip),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(key, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("trans_sigma", self.trans_sigma),
            ("scale_sigma", self.scale_sigma),
            ("pos_trans_sigma", self.pos_trans_sigma),
            ("pos_scale_sigma", self.pos_scale_sigma),
            ("weight_decay", self.weight_decay),
            ("fusion_lr_scale", self.fusion_lr_scale),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum", format!("must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.neg_iou >= 0.0 && self.neg_iou < self.pos_iou && self.pos_iou <= 1.0) {
            return Err(invalid("pos_iou", format!("need 0 <= neg_iou < pos_iou <= 1, got {} / {}", self.neg_iou, self.pos_iou)));
        }
        let counts = [
            ("n_proposals", self.n_proposals),
            ("top_k", self.top_k),
            ("n_pos_init", self.n_pos_init),
            ("n_neg_init", self.n_neg_init),
            ("n_pos_update", self.n_pos_update),
            ("n_neg_update", self.n_neg_update),
            ("oversample", self.oversample),
            ("batch_pos", self.batch_pos),
            ("batch_neg", self.batch_neg),
            ("hard_neg_factor", self.hard_neg_factor),
            ("classifier_hidden", self.classifier_hidden),
            ("update_interval", self.update_interval),
            ("long_term", self.long_term),
            ("short_term", self.short_term),
            ("neg_memory", self.neg_memory),
        ];
        for (key, v) in counts {
            if v == 0 {
                return Err(invalid(key, "must be >= 1"));
            }
        }
        if self.top_k > self.n_proposals {
            return Err(invalid("top_k", format!("{} exceeds n_proposals {}", self.top_k, self.n_proposals)));
        }
        if self.backbone_widths.contains(&0) {
            return Err(invalid("backbone_widths", "widths must be >= 1"));
        }
        if self.backbone.is_empty() {
            return Err(invalid("backbone", "empty"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::MiddleMode;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn keys_parse() {
        let c = RunConfig::from_json(r#"{"fusion": "mid.satt", "modality": "frame", "seed": 7, "precision": "f64"}"#).unwrap();
        assert_eq!(c.fusion, FusionStrategy::Middle(MiddleMode::SpatialAttention));
        assert_eq!(c.modality, Modality::Frame);
        assert_eq!(c.seed, 7);
        assert_eq!(c.precision, Precision::F64);
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(RunConfig::from_json(r#"{"theta": 0}"#), Err(ConfigError::Invalid { key: "theta", .. })));
        assert!(matches!(RunConfig::from_json(r#"{"fusion": "mid.cam"}"#), Err(ConfigError::Json(_))));
        assert!(matches!(RunConfig::from_json(r#"{"thetta": 0.2}"#), Err(ConfigError::Json(_))));
        assert!(RunConfig::from_json(r#"{"pos_iou": 0.2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"top_k": 300}"#).is_err());
        assert!(RunConfig::from_json(r#"{"momentum": 1.0}"#).is_err());
    }

    #[test]
    fn long_mantissas_round_trip() {
        let text = format!(r#"{{"theta": {}}}"#, "2".repeat(115));
        let c = RunConfig::from_json(&text).unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
