//! Stable person identities from raw tracker ids.
//!
//! Two passes: short-term gap bridging (a track ends and another begins a few
//! frames later in nearly the same place) and long-term re-identification by
//! HSV-histogram appearance. The composed [`IdMapping`] sends every raw track
//! id seen in the video to a stable person id.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use crate::bbox::iou;
use crate::bbox::BBox;
use crate::config::{HsvBins, PipelineConfig};
use crate::ingest::{FrameIndex, FrameRecord, HsvSample, TrackId};

pub type PersonId = u32;

/// L1-normalized HSV histogram, linearized hue-major then saturation then value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True for the degenerate histogram of an empty sample set.
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    fn l1_normalize(&mut self) {
        let total: f64 = self.0.iter().sum();
        if total > 0.0 {
            self.0.iter_mut().for_each(|v| *v /= total);
        }
    }
}

fn bin_of(x: f64, bins: u32) -> usize {
    let b = (x * bins as f64).floor();
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins as usize - 1)
    }
}

/// Histogram of pixel samples. Hue 360 wraps to 0; saturation and value of 1.0
/// land in the top bin. An empty sample list yields the all-zero vector.
pub fn hsv_feature(samples: &[HsvSample], bins: HsvBins) -> FeatureVector {
    let mut v = FeatureVector::zeros(bins.len());
    for s in samples {
        let hue = s.hue.rem_euclid(360.0) / 360.0;
        let h = bin_of(hue, bins.hue);
        let sat = bin_of(s.saturation, bins.saturation);
        let val = bin_of(s.value, bins.value);
        let idx = (h * bins.saturation as usize + sat) * bins.value as usize + val;
        v.0[idx] += 1.0;
    }
    v.l1_normalize();
    v
}

/// Cosine of the angle between two histograms; zero when either is all-zero.
///
/// Panics when the lengths differ: histograms of different bin layouts are
/// never comparable.
pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> f64 {
    assert_eq!(a.len(), b.len(), "feature vectors differ in length");
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let na = a.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSegment {
    pub frame_index: FrameIndex,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonTrack {
    pub person_id: PersonId,
    /// Sorted by frame, one entry per frame.
    pub segments: Vec<TrackSegment>,
    /// Mean of the per-frame histograms, renormalized.
    pub appearance: Option<FeatureVector>,
    /// Number of frames that contributed to `appearance`.
    #[serde(default)]
    pub appearance_frames: u32,
}

impl PersonTrack {
    pub fn first_frame(&self) -> FrameIndex {
        self.segments.first().map_or(0, |s| s.frame_index)
    }

    pub fn last_frame(&self) -> FrameIndex {
        self.segments.last().map_or(0, |s| s.frame_index)
    }

    pub fn frames(&self) -> impl Iterator<Item = FrameIndex> + '_ {
        self.segments.iter().map(|s| s.frame_index)
    }

    pub fn segment_at(&self, frame: FrameIndex) -> Option<&TrackSegment> {
        self.segments
            .binary_search_by_key(&frame, |s| s.frame_index)
            .ok()
            .map(|i| &self.segments[i])
    }
}

/// Raw track id to stable person id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdMapping(pub BTreeMap<TrackId, PersonId>);

impl IdMapping {
    pub fn identity<I: IntoIterator<Item = TrackId>>(ids: I) -> Self {
        Self(ids.into_iter().map(|id| (id, id)).collect())
    }

    /// Maps unknown ids to themselves.
    pub fn resolve(&self, id: TrackId) -> PersonId {
        self.0.get(&id).copied().unwrap_or(id)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &IdMapping) -> IdMapping {
        IdMapping(self.0.iter().map(|(&raw, &mid)| (raw, next.resolve(mid))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Groups person detections by raw track id and computes per-track appearance.
pub fn build_tracks(frames: &[FrameRecord], bins: HsvBins) -> Vec<PersonTrack> {
    let mut by_id: BTreeMap<TrackId, PersonTrack> = BTreeMap::new();
    let mut sums: BTreeMap<TrackId, (Vec<f64>, u32)> = BTreeMap::new();
    for frame in frames {
        for p in &frame.persons {
            let track = by_id.entry(p.track_id).or_insert_with(|| PersonTrack {
                person_id: p.track_id,
                segments: Vec::new(),
                appearance: None,
                appearance_frames: 0,
            });
            if track.segments.last().map(|s| s.frame_index) == Some(frame.frame_index) {
                // duplicate detection of the same track in one frame: first wins
                continue;
            }
            track.segments.push(TrackSegment {
                frame_index: frame.frame_index,
                bbox: p.bbox,
                mean_depth: p.mean_depth,
            });
            if let Some(samples) = p.pixel_samples.as_deref().filter(|s| !s.is_empty()) {
                let feat = hsv_feature(samples, bins);
                let (acc, n) = sums.entry(p.track_id).or_insert_with(|| (vec![0.0; bins.len()], 0));
                acc.iter_mut().zip(&feat.0).for_each(|(a, f)| *a += f);
                *n += 1;
            }
        }
    }
    for (id, (acc, n)) in sums {
        let track = by_id.get_mut(&id).expect("track exists");
        let mut feat = FeatureVector(acc);
        feat.l1_normalize();
        track.appearance = Some(feat);
        track.appearance_frames = n;
    }
    let mut tracks: Vec<PersonTrack> = by_id.into_values().collect();
    tracks.sort_by_key(|t| (t.first_frame(), t.person_id));
    tracks
}

/// Bridges brief tracker dropouts.
///
/// A track that starts `gap` frames after another ends, with
/// `1 <= gap < short_term_max_gap`, is a continuation when the IoU of the
/// earlier track's last box and the later track's first box strictly exceeds
/// `short_term_min_iou`. Each track links to at most one successor and one
/// predecessor (closest gap first, then higher IoU); chains take the id of
/// their earliest track.
pub fn short_term_unify(tracks: &[PersonTrack], cfg: &PipelineConfig) -> IdMapping {
    struct Link {
        gap: u32,
        overlap: f64,
        earlier: usize,
        later: usize,
    }

    let mut links = Vec::new();
    for (i, a) in tracks.iter().enumerate() {
        let Some(a_last) = a.segments.last() else { continue };
        for (j, b) in tracks.iter().enumerate() {
            let Some(b_first) = b.segments.first() else { continue };
            if i == j || b_first.frame_index <= a_last.frame_index {
                continue;
            }
            let gap = b_first.frame_index - a_last.frame_index;
            if gap >= cfg.short_term_max_gap {
                continue;
            }
            let overlap = iou(&a_last.bbox, &b_first.bbox);
            if overlap > cfg.short_term_min_iou {
                links.push(Link {
                    gap,
                    overlap,
                    earlier: i,
                    later: j,
                });
            }
        }
    }
    links.sort_by(|x, y| {
        x.gap
            .cmp(&y.gap)
            .then(y.overlap.total_cmp(&x.overlap))
            .then(tracks[x.earlier].person_id.cmp(&tracks[y.earlier].person_id))
            .then(tracks[x.later].person_id.cmp(&tracks[y.later].person_id))
    });

    let mut successor: Vec<Option<usize>> = vec![None; tracks.len()];
    let mut has_predecessor = vec![false; tracks.len()];
    for link in links {
        if successor[link.earlier].is_none() && !has_predecessor[link.later] {
            successor[link.earlier] = Some(link.later);
            has_predecessor[link.later] = true;
        }
    }

    let mut mapping = BTreeMap::new();
    for head in (0..tracks.len()).filter(|&i| !has_predecessor[i]) {
        let stable = tracks[head].person_id;
        let mut cur = Some(head);
        while let Some(i) = cur {
            mapping.insert(tracks[i].person_id, stable);
            cur = successor[i];
        }
    }
    IdMapping(mapping)
}

/// Merges tracks that share a stable id under `mapping`.
pub fn apply_mapping(tracks: &[PersonTrack], mapping: &IdMapping) -> Vec<PersonTrack> {
    let mut merged: BTreeMap<PersonId, PersonTrack> = BTreeMap::new();
    for t in tracks {
        let id = mapping.resolve(t.person_id);
        let entry = merged.entry(id).or_insert_with(|| PersonTrack {
            person_id: id,
            segments: Vec::new(),
            appearance: None,
            appearance_frames: 0,
        });
        entry.segments.extend(t.segments.iter().cloned());
        if let Some(app) = &t.appearance {
            let w = t.appearance_frames.max(1) as f64;
            let acc = entry.appearance.get_or_insert_with(|| FeatureVector::zeros(app.len()));
            let prev = entry.appearance_frames as f64;
            acc.0.iter_mut().zip(&app.0).for_each(|(a, x)| *a = *a * prev + x * w);
            entry.appearance_frames += t.appearance_frames.max(1);
            acc.l1_normalize();
        }
    }
    let mut out: Vec<PersonTrack> = merged
        .into_values()
        .map(|mut t| {
            t.segments.sort_by_key(|s| s.frame_index);
            t.segments.dedup_by_key(|s| s.frame_index);
            t
        })
        .collect();
    out.sort_by_key(|t| (t.first_frame(), t.person_id));
    out
}

/// Appearance-based re-identification across long absences.
///
/// Tracks are scanned by first appearance (ties by id). Each track joins the
/// identity of the previously scanned track with the highest cosine
/// similarity, provided that similarity is at least
/// `reid_similarity_threshold` and the joined identity is never visible in a
/// frame where this track is. Otherwise it keeps its own id.
pub fn long_term_reidentify(tracks: &[PersonTrack], cfg: &PipelineConfig) -> IdMapping {
    let mut order: Vec<&PersonTrack> = tracks.iter().collect();
    order.sort_by_key(|t| (t.first_frame(), t.person_id));

    let mut identity_of: Vec<PersonId> = Vec::with_capacity(order.len());
    let mut frames_of: BTreeMap<PersonId, BTreeSet<FrameIndex>> = BTreeMap::new();
    let mut mapping = BTreeMap::new();

    for (idx, track) in order.iter().enumerate() {
        let mut best: Option<(f64, PersonId)> = None;
        if let Some(app) = track.appearance.as_ref().filter(|a| !a.is_zero()) {
            for (prev_idx, prev) in order[..idx].iter().enumerate() {
                let Some(prev_app) = &prev.appearance else { continue };
                let sim = cosine_similarity(app, prev_app);
                if sim < cfg.reid_similarity_threshold {
                    continue;
                }
                let target = identity_of[prev_idx];
                let taken = &frames_of[&target];
                if track.frames().any(|f| taken.contains(&f)) {
                    continue;
                }
                if best.is_none_or(|(s, _)| sim > s) {
                    best = Some((sim, target));
                }
            }
        }
        let id = best.map_or(track.person_id, |(_, target)| target);
        identity_of.push(id);
        frames_of.entry(id).or_default().extend(track.frames());
        mapping.insert(track.person_id, id);
    }
    IdMapping(mapping)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedIdentities {
    /// Raw track id to final person id, for every track id in persons or actions.
    pub mapping: IdMapping,
    /// One merged track per final person id.
    pub tracks: Vec<PersonTrack>,
}

/// Runs both unification passes over a video.
pub fn resolve_identities(frames: &[FrameRecord], cfg: &PipelineConfig) -> ResolvedIdentities {
    let raw = build_tracks(frames, cfg.hsv_bins);
    let short = short_term_unify(&raw, cfg);
    let after_short = apply_mapping(&raw, &short);
    let long = long_term_reidentify(&after_short, cfg);
    let mut mapping = short.then(&long);
    for frame in frames {
        for a in &frame.actions {
            mapping.0.entry(a.track_id).or_insert(a.track_id);
        }
    }
    let tracks = apply_mapping(&raw, &mapping);
    ResolvedIdentities { mapping, tracks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(id: PersonId, frames: std::ops::RangeInclusive<u32>, bbox: BBox) -> PersonTrack {
        PersonTrack {
            person_id: id,
            segments: frames
                .map(|f| TrackSegment {
                    frame_index: f,
                    bbox,
                    mean_depth: None,
                })
                .collect(),
            appearance: None,
            appearance_frames: 0,
        }
    }

    fn with_app(mut t: PersonTrack, v: Vec<f64>) -> PersonTrack {
        t.appearance = Some(FeatureVector(v));
        t.appearance_frames = 1;
        t
    }

    const BOX: BBox = BBox::new(0.0, 0.0, 10.0, 10.0);

    #[test]
    fn short_gap_high_overlap_merges() {
        // 0.6 = 60 / 100 with the second box inside the first
        let a = track(1, 0..=100, BOX);
        let b = track(2, 105..=200, BBox::new(0.0, 0.0, 10.0, 6.0));
        let m = short_term_unify(&[a, b], &PipelineConfig::default());
        assert_eq!(m.resolve(2), 1);
    }

    #[test]
    fn low_overlap_or_long_gap_does_not_merge() {
        let cfg = PipelineConfig::default();
        let a = track(1, 0..=100, BOX);
        let b = track(2, 105..=200, BBox::new(0.0, 0.0, 10.0, 2.0));
        assert_eq!(short_term_unify(&[a.clone(), b], &cfg).resolve(2), 2);
        let c = track(3, 150..=200, BBox::new(0.0, 0.0, 10.0, 9.0));
        assert_eq!(short_term_unify(&[a, c], &cfg).resolve(3), 3);
    }

    #[test]
    fn short_term_thresholds_are_strict() {
        let cfg = PipelineConfig::default();
        let a = track(1, 0..=20, BOX);
        // gap 9 merges, gap 10 does not
        let b9 = track(2, 29..=40, BOX);
        let b10 = track(2, 30..=40, BOX);
        assert_eq!(short_term_unify(&[a.clone(), b9], &cfg).resolve(2), 1);
        assert_eq!(short_term_unify(&[a.clone(), b10], &cfg).resolve(2), 2);
        // IoU exactly 0.4 does not merge, 0.5 does
        let at = track(2, 25..=40, BBox::new(0.0, 0.0, 10.0, 4.0));
        let above = track(2, 25..=40, BBox::new(0.0, 0.0, 10.0, 5.0));
        assert_eq!(iou(&BOX, &at.segments[0].bbox), 0.4);
        assert_eq!(short_term_unify(&[a.clone(), at], &cfg).resolve(2), 2);
        assert_eq!(short_term_unify(&[a, above], &cfg).resolve(2), 1);
    }

    #[test]
    fn short_term_is_transitive_and_earliest_wins() {
        let tracks = vec![track(7, 0..=10, BOX), track(3, 13..=20, BOX), track(5, 24..=30, BOX)];
        let m = short_term_unify(&tracks, &PipelineConfig::default());
        assert_eq!(m.resolve(3), 7);
        assert_eq!(m.resolve(5), 7);
    }

    #[test]
    fn short_term_never_forks_a_track() {
        // two successors that coexist: only the closer one is linked
        let tracks = vec![track(1, 0..=10, BOX), track(2, 12..=30, BOX), track(3, 14..=30, BOX)];
        let m = short_term_unify(&tracks, &PipelineConfig::default());
        assert_eq!(m.resolve(2), 1);
        assert_eq!(m.resolve(3), 3);
    }

    #[test]
    fn hsv_one_hot_and_empty() {
        let bins = HsvBins::default();
        let s = vec![HsvSample::new(10.0, 0.1, 0.1); 5];
        let f = hsv_feature(&s, bins);
        assert_eq!(f.0.iter().filter(|v| **v == 1.0).count(), 1);
        assert_eq!(f.0[0], 1.0);
        let z = hsv_feature(&[], bins);
        assert!(z.is_zero());
        assert_eq!(z.len(), 128);
    }

    #[test]
    fn hsv_boundaries() {
        let bins = HsvBins::default();
        let wrap = hsv_feature(&[HsvSample::new(360.0, 1.0, 1.0)], bins);
        // hue 360 -> bin 0, s = v = 1 -> top bins
        assert_eq!(wrap.0[3 * 4 + 3], 1.0);
        let top_hue = hsv_feature(&[HsvSample::new(359.9, 0.0, 0.0)], bins);
        assert_eq!(top_hue.0[7 * 16], 1.0);
    }

    #[test]
    fn hsv_uniform_hue_slice_matches_brute_force() {
        let bins = HsvBins::default();
        // one sample at the middle of each hue bin, fixed s and v
        let samples: Vec<_> = (0..8).map(|h| HsvSample::new(h as f64 * 45.0 + 22.5, 0.6, 0.3)).collect();
        let f = hsv_feature(&samples, bins);
        let mut expected = vec![0.0; 128];
        for h in 0..8 {
            // brute force: scan bin edges for each coordinate
            let hb = (0..8).find(|b| (samples[h].hue / 45.0) < (*b + 1) as f64).unwrap();
            let sb = (0..4).find(|b| 0.6 * 4.0 < (*b + 1) as f64).unwrap();
            let vb = (0..4).find(|b| 0.3 * 4.0 < (*b + 1) as f64).unwrap();
            expected[hb * 16 + sb * 4 + vb] += 1.0 / 8.0;
        }
        assert_eq!(f.0, expected);
    }

    #[test]
    fn cosine_examples() {
        let a = FeatureVector(vec![1.0, 1.0]);
        let b = FeatureVector(vec![1.0, 0.0]);
        assert!((cosine_similarity(&a, &b) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-12);
        let c = FeatureVector(vec![0.0, 1.0]);
        assert_eq!(cosine_similarity(&b, &c), 0.0);
        assert_eq!(cosine_similarity(&FeatureVector::zeros(2), &a), 0.0);
    }

    #[test]
    #[should_panic(expected = "differ in length")]
    fn cosine_length_mismatch_panics() {
        cosine_similarity(&FeatureVector(vec![1.0]), &FeatureVector(vec![1.0, 0.0]));
    }

    #[test]
    fn reentry_with_same_clothes_is_reidentified() {
        let cfg = PipelineConfig::default();
        let a = with_app(track(1, 0..=50, BOX), vec![0.5, 0.5, 0.0]);
        let b = with_app(track(9, 300..=400, BBox::new(200.0, 0.0, 210.0, 10.0)), vec![0.5, 0.5, 0.0]);
        let m = long_term_reidentify(&[a, b], &cfg);
        assert_eq!(m.resolve(9), 1);
    }

    #[test]
    fn orthogonal_appearance_is_not_merged() {
        let cfg = PipelineConfig::default();
        let a = with_app(track(1, 0..=50, BOX), vec![1.0, 0.0]);
        let b = with_app(track(2, 300..=400, BOX), vec![0.0, 1.0]);
        assert_eq!(long_term_reidentify(&[a, b], &cfg).resolve(2), 2);
    }

    #[test]
    fn merges_into_most_similar_candidate() {
        let mut cfg = PipelineConfig::default();
        cfg.reid_similarity_threshold = 0.75;
        // b8 and b9 coexist, so they stay apart; c has cosine 0.8 with b8 and 0.9 with b9
        let b8 = with_app(track(2, 20..=30, BOX), vec![0.8, 0.6]);
        let b9 = with_app(track(4, 22..=30, BOX), vec![0.9, (1.0f64 - 0.81).sqrt()]);
        let c = with_app(track(3, 40..=50, BOX), vec![1.0, 0.0]);
        let app = |t: &PersonTrack| t.appearance.clone().unwrap();
        assert!((cosine_similarity(&app(&c), &app(&b8)) - 0.8).abs() < 1e-9);
        assert!((cosine_similarity(&app(&c), &app(&b9)) - 0.9).abs() < 1e-9);
        let m = long_term_reidentify(&[b8, b9, c], &cfg);
        assert_eq!(m.resolve(4), 4);
        assert_eq!(m.resolve(3), 4);
    }

    #[test]
    fn coexisting_lookalikes_stay_apart() {
        let cfg = PipelineConfig::default();
        let a = with_app(track(1, 0..=50, BOX), vec![1.0, 0.0]);
        let b = with_app(track(2, 40..=90, BOX), vec![1.0, 0.0]);
        assert_eq!(long_term_reidentify(&[a, b], &cfg).resolve(2), 2);
    }

    #[test]
    fn mapping_composition() {
        let short = IdMapping([(1, 1), (2, 1), (3, 3)].into_iter().collect());
        let long = IdMapping([(1, 1), (3, 1)].into_iter().collect());
        let m = short.then(&long);
        assert_eq!(m.0.values().copied().collect::<Vec<_>>(), vec![1, 1, 1]);
    }

    fn arb_tracks() -> impl Strategy<Value = Vec<PersonTrack>> {
        prop::collection::vec((0u32..100, 1u32..30, 0usize..3, 0.0..50.0f64), 1..8).prop_map(|specs| {
            specs
                .into_iter()
                .enumerate()
                .map(|(i, (start, len, colour, x))| {
                    let mut v = vec![0.0; 3];
                    v[colour] = 1.0;
                    with_app(track(i as u32 + 1, start..=start + len, BBox::new(x, 0.0, x + 20.0, 40.0)), v)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn composed_mapping_never_merges_coexisting_tracks(tracks in arb_tracks()) {
            let cfg = PipelineConfig::default();
            let short = short_term_unify(&tracks, &cfg);
            let long = long_term_reidentify(&apply_mapping(&tracks, &short), &cfg);
            let m = short.then(&long);
            prop_assert_eq!(m.len(), tracks.len());
            for a in &tracks {
                for b in &tracks {
                    if a.person_id < b.person_id && m.resolve(a.person_id) == m.resolve(b.person_id) {
                        let fa: BTreeSet<_> = a.frames().collect();
                        prop_assert!(b.frames().all(|f| !fa.contains(&f)));
                    }
                }
            }
        }
    }
}
