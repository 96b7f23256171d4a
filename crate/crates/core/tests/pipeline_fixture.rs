use std::path::Path;

use gest_core::config::PipelineConfig;
use gest_core::graph::{export_dot, GestGraph};
use gest_core::identity::resolve_identities;
use gest_core::ingest::{parse_video_bytes, ParseOptions, ParsedVideo};
use gest_core::llm::build_description_prompt;
use gest_core::pipeline::{build_graph_from_frames, proto_for_graph, PipelineError};
use gest_core::relations::RelationKind;

fn fixture() -> ParsedVideo {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/two_actor/detections.ndjson");
    parse_video_bytes(&std::fs::read(path).unwrap(), ParseOptions { strict: true }).unwrap()
}

#[test]
fn id_switch_and_reentry_are_resolved() {
    let v = fixture();
    let ids = resolve_identities(&v.frames, &PipelineConfig::default());
    // A: dropout of three frames, boxes shifted by two pixels
    assert_eq!(ids.mapping.resolve(7), 1);
    // B: out of view for fifteen frames, matched on appearance
    assert_eq!(ids.mapping.resolve(9), 3);
    assert_eq!(ids.tracks.len(), 2);
}

#[test]
fn events_objects_and_edges() {
    let v = fixture();
    let g = build_graph_from_frames(&v.meta, &v.frames, &PipelineConfig::default()).unwrap();
    let summary: Vec<_> = g
        .nodes
        .iter()
        .map(|e| {
            let objects: Vec<&str> = e.candidate_objects.iter().map(|c| c.label.as_str()).collect();
            (e.person_id, e.action_label.as_str(), e.start_frame, e.end_frame, objects)
        })
        .collect();
    assert_eq!(
        summary,
        vec![
            (1, "read", 0, 60, vec!["book", "cup"]),
            (1, "write", 70, 299, vec!["paper"]),
            (3, "walk", 220, 290, vec![]),
        ]
    );
    let edges: Vec<_> = g.edges.iter().map(|r| (r.src.0, r.dst.0, r.kind)).collect();
    assert_eq!(edges, vec![(0, 1, RelationKind::Next), (1, 2, RelationKind::Meanwhile)]);
}

#[test]
fn tighter_thresholds_change_the_graph() {
    let v = fixture();
    let mut cfg = PipelineConfig::default();
    cfg.next_max_gap = 9;
    let g = build_graph_from_frames(&v.meta, &v.frames, &cfg).unwrap();
    assert!(g.edges.iter().all(|r| r.kind != RelationKind::Next));

    cfg = PipelineConfig::default();
    cfg.action_min_confidence = 0.95;
    let g = build_graph_from_frames(&v.meta, &v.frames, &cfg).unwrap();
    assert!(g.nodes.is_empty());
}

#[test]
fn invalid_config_is_refused() {
    let v = fixture();
    let mut cfg = PipelineConfig::default();
    cfg.actions_per_frame = 0;
    assert!(matches!(build_graph_from_frames(&v.meta, &v.frames, &cfg), Err(PipelineError::Config(_))));
}

#[test]
fn dump_round_trip_preserves_downstream_artifacts() {
    let v = fixture();
    let g = build_graph_from_frames(&v.meta, &v.frames, &PipelineConfig::default()).unwrap();
    let back = GestGraph::from_json(&g.to_json()).unwrap();
    assert_eq!(back.to_json(), g.to_json());
    assert_eq!(export_dot(&back), export_dot(&g));
    assert_eq!(proto_for_graph(&back), proto_for_graph(&g));
}

#[test]
fn prompt_carries_scene_and_statements() {
    let v = fixture();
    let g = build_graph_from_frames(&v.meta, &v.frames, &PipelineConfig::default()).unwrap();
    let proto = proto_for_graph(&g);
    let prompt = build_description_prompt(&proto).unwrap();
    assert!(prompt.user_content.starts_with("Scene: office.\n"));
    assert_eq!(prompt.user_content.lines().count(), 4);
    assert!(prompt.user_content.contains("<book | cup>"));
}
