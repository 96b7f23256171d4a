//! Events: one actor doing one action over a frame span, with the objects
//! that were near the actor while doing it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action_filter::ActionObservation;
use crate::bbox::{iou, BBox};
use crate::config::PipelineConfig;
use crate::identity::PersonId;
use crate::ingest::{FrameIndex, FrameRecord, PersonDetection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u32);

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateObject {
    pub label: String,
    /// Fraction of the event's frames in which the object was associated.
    pub presence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: EventId,
    pub person_id: PersonId,
    pub action_label: String,
    pub start_frame: FrameIndex,
    pub end_frame: FrameIndex,
    pub per_frame_bboxes: BTreeMap<FrameIndex, BBox>,
    /// Objects at or above the presence threshold, most present first.
    pub candidate_objects: Vec<CandidateObject>,
    /// Per-object count of frames with an association, before thresholding.
    #[serde(default)]
    pub object_frame_counts: BTreeMap<String, u32>,
}

impl Event {
    pub fn span_len(&self) -> u32 {
        self.end_frame - self.start_frame + 1
    }

    /// Share of the span's frames that carry an observation.
    pub fn density(&self) -> f64 {
        self.per_frame_bboxes.len() as f64 / self.span_len() as f64
    }

    /// Box at `frame`, or the box of the nearest stored frame (earlier wins ties).
    pub fn bbox_at(&self, frame: FrameIndex) -> Option<BBox> {
        let before = self.per_frame_bboxes.range(..=frame).next_back();
        let after = self.per_frame_bboxes.range(frame..).next();
        match (before, after) {
            (Some((&fb, b)), Some((&fa, a))) => Some(if frame - fb <= fa - frame { *b } else { *a }),
            (Some((_, b)), None) => Some(*b),
            (None, Some((_, a))) => Some(*a),
            (None, None) => None,
        }
    }

    fn refresh_candidates(&mut self, min_presence: f64) {
        let span = self.span_len();
        let mut c: Vec<CandidateObject> = self
            .object_frame_counts
            .iter()
            .map(|(label, &n)| CandidateObject {
                label: label.clone(),
                presence: n.min(span) as f64 / span as f64,
            })
            .filter(|c| c.presence >= min_presence && c.presence > 0.0)
            .collect();
        c.sort_by(|a, b| b.presence.total_cmp(&a.presence).then_with(|| a.label.cmp(&b.label)));
        self.candidate_objects = c;
    }

    fn sort_key(&self) -> (FrameIndex, FrameIndex, PersonId, &str) {
        (self.start_frame, self.end_frame, self.person_id, self.action_label.as_str())
    }
}

fn is_person_class(label: &str) -> bool {
    label.trim().eq_ignore_ascii_case("person")
}

/// Objects near the actor in one frame.
///
/// The actor's box (the tracked person's, falling back to the action box) is
/// enlarged by `bbox_enlarge_fraction` per side within `bounds`. Objects that
/// touch the enlarged box, reach `object_min_iou` against it, and sit within
/// `depth_diff_threshold` of the actor's depth (when both depths are known)
/// are kept. Person detections are never objects. Returns sorted unique labels.
pub fn associate_objects(
    action: &ActionObservation,
    frame: &FrameRecord,
    person: Option<&PersonDetection>,
    bounds: (f64, f64),
    cfg: &PipelineConfig,
) -> Vec<String> {
    let actor_box = person.map_or(action.bbox, |p| p.bbox);
    let actor_depth = person.and_then(|p| p.mean_depth);
    let zone = actor_box.enlarged(cfg.bbox_enlarge_fraction, bounds.0, bounds.1);

    let mut labels: Vec<String> = frame
        .objects
        .iter()
        .filter(|o| !is_person_class(&o.label))
        .filter(|o| o.bbox.touches(&zone))
        .filter(|o| iou(&o.bbox, &zone) >= cfg.object_min_iou)
        .filter(|o| match (actor_depth, o.mean_depth) {
            (Some(pd), Some(od)) => (pd - od).abs() <= cfg.depth_diff_threshold,
            _ => true,
        })
        .map(|o| o.label.clone())
        .collect();
    labels.sort();
    labels.dedup();
    labels
}

/// Groups observations into maximal runs of the same `(person, label)` on
/// consecutive frames. Ids are provisional: `0..n` in temporal order.
pub fn aggregate_events(observations: &[ActionObservation], cfg: &PipelineConfig) -> Vec<Event> {
    let mut by_key: BTreeMap<(PersonId, &str), Vec<&ActionObservation>> = BTreeMap::new();
    for o in observations {
        by_key.entry((o.person_id, o.label.as_str())).or_default().push(o);
    }

    let mut events = Vec::new();
    for ((person_id, label), mut obs) in by_key {
        obs.sort_by_key(|o| o.frame_index);
        let mut current: Option<Event> = None;
        for o in obs {
            let extend = current
                .as_ref()
                .is_some_and(|e| o.frame_index <= e.end_frame.saturating_add(1));
            if !extend {
                if let Some(done) = current.take() {
                    events.push(done);
                }
                current = Some(Event {
                    event_id: EventId(0),
                    person_id,
                    action_label: label.to_string(),
                    start_frame: o.frame_index,
                    end_frame: o.frame_index,
                    per_frame_bboxes: BTreeMap::new(),
                    candidate_objects: Vec::new(),
                    object_frame_counts: BTreeMap::new(),
                });
            }
            let e = current.as_mut().expect("event open");
            e.end_frame = e.end_frame.max(o.frame_index);
            if e.per_frame_bboxes.insert(o.frame_index, o.bbox).is_none() {
                for obj in &o.objects {
                    *e.object_frame_counts.entry(obj.clone()).or_default() += 1;
                }
            }
        }
        events.extend(current);
    }
    finalize(events, cfg)
}

/// Merges events of the same `(person, label)` whose gap is at most
/// `event_unify_max_gap` frames, left to right until none qualify. Object
/// presence is recomputed over the merged span, gap frames included.
pub fn unify_events(events: &[Event], cfg: &PipelineConfig) -> Vec<Event> {
    let mut by_key: BTreeMap<(PersonId, &str), Vec<&Event>> = BTreeMap::new();
    for e in events {
        by_key.entry((e.person_id, e.action_label.as_str())).or_default().push(e);
    }

    let mut out = Vec::new();
    for (_, mut group) in by_key {
        group.sort_by_key(|e| (e.start_frame, e.end_frame));
        let mut current: Option<Event> = None;
        for e in group {
            match current.as_mut() {
                Some(cur) if e.start_frame as u64 <= cur.end_frame as u64 + cfg.event_unify_max_gap as u64 => {
                    cur.end_frame = cur.end_frame.max(e.end_frame);
                    for (&f, b) in &e.per_frame_bboxes {
                        cur.per_frame_bboxes.entry(f).or_insert(*b);
                    }
                    for (label, n) in &e.object_frame_counts {
                        *cur.object_frame_counts.entry(label.clone()).or_default() += n;
                    }
                }
                _ => {
                    out.extend(current.take());
                    current = Some(e.clone());
                }
            }
        }
        out.extend(current);
    }
    finalize(out, cfg)
}

/// Recomputes candidates, sorts by `(start, end, person, label)` and numbers
/// events from zero in that order.
fn finalize(mut events: Vec<Event>, cfg: &PipelineConfig) -> Vec<Event> {
    for e in &mut events {
        e.refresh_candidates(cfg.object_min_presence);
    }
    events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    for (i, e) in events.iter_mut().enumerate() {
        e.event_id = EventId(i as u32);
    }
    events
}
