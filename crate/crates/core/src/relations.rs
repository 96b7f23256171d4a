//! Spatial and temporal edges between events.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::event_builder::{Event, EventId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    SpaceClose,
    Next,
    SameTime,
    Meanwhile,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::SpaceClose => "space_close",
            RelationKind::Next => "next",
            RelationKind::SameTime => "same_time",
            RelationKind::Meanwhile => "meanwhile",
        }
    }

    pub fn is_temporal(self) -> bool {
        !matches!(self, RelationKind::SpaceClose)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub src: EventId,
    pub dst: EventId,
    pub kind: RelationKind,
    /// Qualifying-frame fraction for `space_close`; overlap length in frames
    /// for `same_time` and `meanwhile`; gap in frames for `next`.
    pub evidence: f64,
}

fn overlap(a: &Event, b: &Event) -> Option<(u32, u32)> {
    let lo = a.start_frame.max(b.start_frame);
    let hi = a.end_frame.min(b.end_frame);
    (lo <= hi).then_some((lo, hi))
}

/// `space_close` edge when the actors stay near each other for most of the
/// frames both events share.
///
/// A shared frame qualifies when the distance between box centroids divided
/// by the sum of the box diagonals is below `spatial_ratio_threshold`. The
/// edge exists when the qualifying fraction strictly exceeds
/// `spatial_min_overlap_fraction`. Frames without a stored box use the
/// nearest stored one.
pub fn spatial_relation(a: &Event, b: &Event, cfg: &PipelineConfig) -> Option<Relation> {
    if a.event_id == b.event_id {
        return None;
    }
    let (lo, hi) = overlap(a, b)?;
    let mut qualifying = 0u32;
    for f in lo..=hi {
        let (Some(ba), Some(bb)) = (a.bbox_at(f), b.bbox_at(f)) else { continue };
        let (ax, ay) = ba.centroid();
        let (bx, by) = bb.centroid();
        let dist = (ax - bx).hypot(ay - by);
        let diag = ba.diagonal() + bb.diagonal();
        let ratio = if diag > 0.0 {
            dist / diag
        } else if dist == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio < cfg.spatial_ratio_threshold {
            qualifying += 1;
        }
    }
    let fraction = qualifying as f64 / (hi - lo + 1) as f64;
    if fraction > cfg.spatial_min_overlap_fraction {
        let (src, dst) = if a.event_id < b.event_id { (a, b) } else { (b, a) };
        Some(Relation {
            src: src.event_id,
            dst: dst.event_id,
            kind: RelationKind::SpaceClose,
            evidence: fraction,
        })
    } else {
        None
    }
}

fn temporal_order<'a>(a: &'a Event, b: &'a Event) -> (&'a Event, &'a Event) {
    let ka = (a.start_frame, a.end_frame, a.event_id);
    let kb = (b.start_frame, b.end_frame, b.event_id);
    if ka <= kb {
        (a, b)
    } else {
        (b, a)
    }
}

/// Classifies a pair of events in time.
///
/// With `first` the earlier-starting event: `same_time` when both starts and
/// both ends are within `same_time_tolerance`; otherwise `meanwhile` when the
/// spans share a frame; otherwise `next` when the second starts at most
/// `next_max_gap` frames after the first ends. The edge always points from
/// the earlier event, so argument order does not matter.
pub fn temporal_relation(a: &Event, b: &Event, cfg: &PipelineConfig) -> Option<Relation> {
    if a.event_id == b.event_id {
        return None;
    }
    let (first, second) = temporal_order(a, b);
    let tol = cfg.same_time_tolerance;
    let (kind, evidence) = if first.start_frame.abs_diff(second.start_frame) <= tol
        && first.end_frame.abs_diff(second.end_frame) <= tol
    {
        let shared = overlap(first, second).map_or(0, |(lo, hi)| hi - lo + 1);
        (RelationKind::SameTime, shared as f64)
    } else if let Some((lo, hi)) = overlap(first, second) {
        (RelationKind::Meanwhile, (hi - lo + 1) as f64)
    } else {
        let gap = second.start_frame - first.end_frame;
        if gap > cfg.next_max_gap {
            return None;
        }
        (RelationKind::Next, gap as f64)
    };
    Some(Relation {
        src: first.event_id,
        dst: second.event_id,
        kind,
        evidence,
    })
}

/// All temporal and spatial edges over unordered event pairs, in
/// `(src, dst, kind)` order.
pub fn build_relations(events: &[Event], cfg: &PipelineConfig) -> Vec<Relation> {
    let mut out = Vec::new();
    for (i, a) in events.iter().enumerate() {
        for b in &events[i + 1..] {
            out.extend(temporal_relation(a, b, cfg));
            out.extend(spatial_relation(a, b, cfg));
        }
    }
    out.sort_by_key(|r| (r.src, r.dst, r.kind));
    out
}
