//! The stages wired together: detections in, graph and proto-language out.

use std::collections::HashMap;

use thiserror::Error;

use crate::action_filter::{denoise, observations_from_frames, ActionObservation};
use crate::config::{ConfigError, PipelineConfig};
use crate::event_builder::{aggregate_events, associate_objects, unify_events};
use crate::graph::{build_graph, group_by_actor, reduce_next_edges, temporal_sort, GestGraph, GraphError};
use crate::identity::{resolve_identities, IdMapping};
use crate::ingest::{validate, FrameRecord, ValidationReport, VideoMeta};
use crate::protolang::{render_proto, ProtoDocument};
use crate::relations::build_relations;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn attach_objects(observations: &mut [ActionObservation], frames: &[FrameRecord], mapping: &IdMapping, meta: &VideoMeta, cfg: &PipelineConfig) {
    let by_index: HashMap<u32, &FrameRecord> = frames.iter().map(|f| (f.frame_index, f)).collect();
    let bounds = (meta.width as f64, meta.height as f64);
    for obs in observations {
        let Some(frame) = by_index.get(&obs.frame_index) else { continue };
        let person = frame.persons.iter().find(|p| mapping.resolve(p.track_id) == obs.person_id);
        obs.objects = associate_objects(obs, frame, person, bounds, cfg);
    }
}

/// Builds the event graph of one video. Validation errors abort; warnings
/// are logged.
pub fn build_graph_from_frames(meta: &VideoMeta, frames: &[FrameRecord], cfg: &PipelineConfig) -> Result<GestGraph, PipelineError> {
    run(meta, frames, cfg, false)
}

/// Like [`build_graph_from_frames`] but only logs validation errors. The
/// graph itself is still checked and may be rejected.
pub fn build_graph_forced(meta: &VideoMeta, frames: &[FrameRecord], cfg: &PipelineConfig) -> Result<GestGraph, PipelineError> {
    run(meta, frames, cfg, true)
}

fn run(meta: &VideoMeta, frames: &[FrameRecord], cfg: &PipelineConfig, force: bool) -> Result<GestGraph, PipelineError> {
    cfg.validate()?;
    let report = validate(meta, frames, cfg);
    if report.has_errors() && !force {
        return Err(PipelineError::Invalid(report));
    }
    for issue in &report.issues {
        log::warn!("{}: {issue}", meta.video_id);
    }

    let ids = resolve_identities(frames, cfg);
    let per_frame = observations_from_frames(frames, &ids.mapping);
    let mut kept = denoise(&per_frame, cfg);
    attach_objects(&mut kept, frames, &ids.mapping, meta, cfg);
    let events = unify_events(&aggregate_events(&kept, cfg), cfg);
    let mut relations = build_relations(&events, cfg);
    if cfg.reduce_next_edges {
        relations = reduce_next_edges(&relations);
    }
    log::debug!(
        "{}: {} persons, {} observations kept, {} events, {} edges",
        meta.video_id,
        ids.tracks.len(),
        kept.len(),
        events.len(),
        relations.len()
    );
    Ok(build_graph(events, relations, meta.clone())?)
}

/// Proto-language for a graph, grouped by actor in temporal order, with the
/// scene label from the video metadata when present.
pub fn proto_for_graph(g: &GestGraph) -> ProtoDocument {
    let sorted = temporal_sort(g);
    let groups = group_by_actor(&sorted, g);
    render_proto(&groups, g, g.meta.scene_label.as_deref())
}
