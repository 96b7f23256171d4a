//! Per-frame action denoising: confidence cut, top-k, and windowed voting.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::config::{PipelineConfig, TopKScope};
use crate::identity::{IdMapping, PersonId};
use crate::ingest::{FrameIndex, FrameRecord};

/// One action of one stable person in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionObservation {
    pub frame_index: FrameIndex,
    pub person_id: PersonId,
    pub label: String,
    pub confidence: f64,
    pub bbox: BBox,
    /// Objects associated with the actor in this frame, sorted and deduplicated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<String>,
}

/// Rewrites raw tracker ids to stable person ids, one inner list per frame.
pub fn observations_from_frames(frames: &[FrameRecord], mapping: &IdMapping) -> Vec<Vec<ActionObservation>> {
    frames
        .iter()
        .map(|f| {
            f.actions
                .iter()
                .map(|a| ActionObservation {
                    frame_index: f.frame_index,
                    person_id: mapping.resolve(a.track_id),
                    label: a.label.clone(),
                    confidence: a.confidence,
                    bbox: a.bbox,
                    objects: Vec::new(),
                })
                .collect()
        })
        .collect()
}

fn rank(a: &ActionObservation, b: &ActionObservation) -> std::cmp::Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.label.cmp(&b.label))
        .then(a.person_id.cmp(&b.person_id))
}

/// Keeps the most confident actions of a single frame.
///
/// Drops observations with confidence strictly below `action_min_confidence`,
/// collapses repeated `(person, label)` pairs to their best confidence, then
/// keeps `actions_per_frame` observations for the frame (or per person, under
/// [`TopKScope::PersonFrame`]). Ties rank by label, then person id. Output is
/// in rank order.
pub fn filter_by_confidence(frame_actions: &[ActionObservation], cfg: &PipelineConfig) -> Vec<ActionObservation> {
    let mut kept: Vec<ActionObservation> = frame_actions
        .iter()
        .filter(|a| a.confidence >= cfg.action_min_confidence)
        .cloned()
        .collect();
    kept.sort_by(rank);
    let mut seen = std::collections::HashSet::new();
    kept.retain(|a| seen.insert((a.person_id, a.label.clone())));

    let k = cfg.actions_per_frame as usize;
    match cfg.top_k_scope {
        TopKScope::Frame => kept.truncate(k),
        TopKScope::PersonFrame => {
            let mut per_person: HashMap<PersonId, usize> = HashMap::new();
            kept.retain(|a| {
                let n = per_person.entry(a.person_id).or_default();
                *n += 1;
                *n <= k
            });
        }
    }
    kept
}

/// Number of entries of `sorted` inside `[center - radius, center + radius]`.
pub fn window_support(sorted: &[FrameIndex], center: FrameIndex, radius: u32) -> usize {
    let lo = center.saturating_sub(radius);
    let hi = center.saturating_add(radius);
    let start = sorted.partition_point(|&f| f < lo);
    let end = sorted.partition_point(|&f| f <= hi);
    end - start
}

/// Single-pass windowed vote over the pre-vote stream.
///
/// An observation at frame `f` survives when its `(person, label)` occurs in
/// at least `vote_min_count` frames of `[f - vote_radius, f + vote_radius]`,
/// itself included. Windows are truncated at the video boundaries. Survivors
/// keep their input order.
pub fn temporal_vote(observations: &[ActionObservation], cfg: &PipelineConfig) -> Vec<ActionObservation> {
    let mut frames: BTreeMap<(PersonId, &str), Vec<FrameIndex>> = BTreeMap::new();
    for o in observations {
        frames.entry((o.person_id, o.label.as_str())).or_default().push(o.frame_index);
    }
    for v in frames.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let min = cfg.vote_min_count as usize;
    observations
        .iter()
        .filter(|o| {
            let sorted = &frames[&(o.person_id, o.label.as_str())];
            window_support(sorted, o.frame_index, cfg.vote_radius) >= min
        })
        .cloned()
        .collect()
}

/// Confidence filtering frame by frame, then voting over the whole stream.
pub fn denoise(per_frame: &[Vec<ActionObservation>], cfg: &PipelineConfig) -> Vec<ActionObservation> {
    let filtered: Vec<ActionObservation> = per_frame
        .iter()
        .flat_map(|frame| filter_by_confidence(frame, cfg))
        .collect();
    temporal_vote(&filtered, cfg)
}
