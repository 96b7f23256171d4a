//! Pipeline thresholds.
//!
//! Every numeric knob of graph construction lives in [`PipelineConfig`]. The
//! struct is read from the `[pipeline]` table of the TOML config file; missing
//! keys take their defaults, unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Histogram resolution for appearance features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsvBins {
    pub hue: u32,
    pub saturation: u32,
    pub value: u32,
}

impl HsvBins {
    pub fn len(&self) -> usize {
        self.hue as usize * self.saturation as usize * self.value as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for HsvBins {
    fn default() -> Self {
        Self {
            hue: 8,
            saturation: 4,
            value: 4,
        }
    }
}

/// Scope of the per-frame top-k action cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopKScope {
    /// At most `actions_per_frame` observations per frame across all persons.
    #[default]
    Frame,
    /// At most `actions_per_frame` observations per person per frame.
    PersonFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Largest frame gap (exclusive) bridged by short-term id unification.
    pub short_term_max_gap: u32,
    /// IoU that the boxes across the gap must strictly exceed.
    pub short_term_min_iou: f64,
    pub reid_similarity_threshold: f64,
    pub hsv_bins: HsvBins,
    /// Actions with confidence strictly below this are dropped.
    pub action_min_confidence: f64,
    pub actions_per_frame: u32,
    pub top_k_scope: TopKScope,
    /// Half-width of the voting window; the window spans `2 * radius + 1` frames.
    pub vote_radius: u32,
    pub vote_min_count: u32,
    pub bbox_enlarge_fraction: f64,
    pub object_min_iou: f64,
    pub depth_diff_threshold: f64,
    pub object_min_presence: f64,
    pub event_unify_max_gap: u32,
    pub spatial_ratio_threshold: f64,
    pub spatial_min_overlap_fraction: f64,
    pub same_time_tolerance: u32,
    pub next_max_gap: u32,
    /// Drop `next` edges implied by a chain of shorter `next` edges.
    pub reduce_next_edges: bool,
    /// Pixel samples beyond this count in one detection raise a validation warning.
    pub pixel_sample_cap: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            short_term_max_gap: 10,
            short_term_min_iou: 0.4,
            reid_similarity_threshold: 0.85,
            hsv_bins: HsvBins::default(),
            action_min_confidence: 0.75,
            actions_per_frame: 2,
            top_k_scope: TopKScope::Frame,
            vote_radius: 5,
            vote_min_count: 5,
            bbox_enlarge_fraction: 0.10,
            object_min_iou: 0.05,
            depth_diff_threshold: 0.10,
            object_min_presence: 0.10,
            event_unify_max_gap: 30,
            spatial_ratio_threshold: 0.5,
            spatial_min_overlap_fraction: 0.75,
            same_time_tolerance: 10,
            next_max_gap: 150,
            reduce_next_edges: false,
            pixel_sample_cap: 2048,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fractions: [(&'static str, f64); 8] = [
            ("short_term_min_iou", self.short_term_min_iou),
            ("reid_similarity_threshold", self.reid_similarity_threshold),
            ("action_min_confidence", self.action_min_confidence),
            ("object_min_iou", self.object_min_iou),
            ("depth_diff_threshold", self.depth_diff_threshold),
            ("object_min_presence", self.object_min_presence),
            ("spatial_min_overlap_fraction", self.spatial_min_overlap_fraction),
            ("bbox_enlarge_fraction", self.bbox_enlarge_fraction),
        ];
        for (key, v) in fractions {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::InvalidValue {
                    key,
                    reason: format!("{v} is outside [0, 1]"),
                });
            }
        }
        if !(self.spatial_ratio_threshold.is_finite() && self.spatial_ratio_threshold >= 0.0) {
            return Err(ConfigError::InvalidValue {
                key: "spatial_ratio_threshold",
                reason: format!("{} must be a non-negative number", self.spatial_ratio_threshold),
            });
        }
        if self.actions_per_frame < 1 {
            return Err(ConfigError::InvalidValue {
                key: "actions_per_frame",
                reason: "must be at least 1".into(),
            });
        }
        let b = self.hsv_bins;
        if b.hue == 0 || b.saturation == 0 || b.value == 0 {
            return Err(ConfigError::InvalidValue {
                key: "hsv_bins",
                reason: "every bin count must be at least 1".into(),
            });
        }
        if b.len() > 1 << 20 {
            return Err(ConfigError::InvalidValue {
                key: "hsv_bins",
                reason: format!("{} bins is too many", b.len()),
            });
        }
        Ok(())
    }

    /// Parses a bare `PipelineConfig` TOML table and validates it.
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 over the canonical JSON encoding of every effective value.
    pub fn hash_hex(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}
