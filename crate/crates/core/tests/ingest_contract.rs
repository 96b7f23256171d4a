use std::path::Path;

use gest_core::config::PipelineConfig;
use gest_core::ingest::{
    parse_video_bytes, validate, write_video_record, ActionDetection, FrameRecord, HsvSample, ObjectDetection, ObjectSource,
    ParseOptions, PersonDetection, VideoMeta,
};
use gest_core::BBox;
use proptest::prelude::*;

fn repo(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

const STRICT: ParseOptions = ParseOptions { strict: true };

#[test]
fn documented_example_is_valid() {
    let doc = std::fs::read_to_string(repo("docs/ingest-schema.md")).unwrap();
    let start = doc.find("```json\n").expect("example block") + "```json\n".len();
    let end = start + doc[start..].find("```").unwrap();
    let parsed = parse_video_bytes(doc[start..end].as_bytes(), STRICT).unwrap();
    assert_eq!(parsed.meta.video_id, "desk_demo");
    assert_eq!(parsed.frames.len(), 3);
    assert!(parsed.frames[2].persons.is_empty());
    assert_eq!(parsed.frames[0].objects[0].source, ObjectSource::Detector);
    let report = validate(&parsed.meta, &parsed.frames, &PipelineConfig::default());
    assert!(report.is_empty(), "{report}");
}

#[test]
fn bundled_fixture_is_clean() {
    let bytes = std::fs::read(repo("fixtures/two_actor/detections.ndjson")).unwrap();
    let parsed = parse_video_bytes(&bytes, STRICT).unwrap();
    assert!(parsed.warnings.is_empty());
    assert_eq!(parsed.meta.scene_label.as_deref(), Some("office"));
    let report = validate(&parsed.meta, &parsed.frames, &PipelineConfig::default());
    assert!(report.is_empty(), "{report}");

    let mut out = Vec::new();
    write_video_record(&mut out, &parsed.meta, &parsed.frames).unwrap();
    assert_eq!(out, bytes, "writer output is canonical");
}

fn arb_bbox() -> impl Strategy<Value = BBox> {
    (0.0..600.0f64, 0.0..400.0f64, 0.0..40.0f64, 0.0..80.0f64).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
}

fn arb_frame(index: u32) -> impl Strategy<Value = FrameRecord> {
    let person = (0u32..6, arb_bbox(), prop::option::of(0.0..=1.0f64), prop::option::of(prop::collection::vec((0.0..360.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 0..5)))
        .prop_map(|(track_id, bbox, mean_depth, samples)| PersonDetection {
            track_id,
            bbox,
            mean_depth,
            pixel_samples: samples.map(|v| v.into_iter().map(|(h, s, v)| HsvSample::new(h, s, v)).collect()),
        });
    let action = (0u32..6, "[a-z ]{1,12}", 0.0..=1.0f64, arb_bbox()).prop_map(|(track_id, label, confidence, bbox)| ActionDetection {
        track_id,
        label,
        confidence,
        bbox,
    });
    let object = ("[a-z]{1,8}", arb_bbox(), prop::option::of(0.0..=1.0f64), prop::bool::ANY).prop_map(|(label, bbox, mean_depth, seg)| {
        ObjectDetection {
            label,
            bbox,
            mean_depth,
            source: if seg { ObjectSource::Segmentation } else { ObjectSource::Detector },
        }
    });
    (
        prop::collection::vec(person, 0..3),
        prop::collection::vec(action, 0..3),
        prop::collection::vec(object, 0..3),
    )
        .prop_map(move |(persons, actions, objects)| FrameRecord {
            frame_index: index,
            persons,
            actions,
            objects,
        })
}

fn arb_video() -> impl Strategy<Value = (VideoMeta, Vec<FrameRecord>)> {
    let meta = ("[a-z0-9_]{1,10}", 1.0..120.0f64, 1u32..2000, 1u32..2000, prop::option::of("[a-z ]{1,10}")).prop_map(
        |(video_id, fps, width, height, scene_label)| VideoMeta {
            video_id,
            fps,
            width,
            height,
            scene_label,
        },
    );
    let frames = prop::collection::btree_set(0u32..500, 0..8)
        .prop_flat_map(|idx| idx.into_iter().map(arb_frame).collect::<Vec<_>>());
    (meta, frames)
}

proptest! {
    #[test]
    fn parse_inverts_write((meta, frames) in arb_video()) {
        let mut buf = Vec::new();
        write_video_record(&mut buf, &meta, &frames).unwrap();
        let parsed = parse_video_bytes(&buf, STRICT).unwrap();
        prop_assert_eq!(parsed.meta, meta);
        prop_assert_eq!(parsed.frames, frames);
        prop_assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn permuted_frames_come_back_sorted((meta, frames) in arb_video(), seed in any::<u64>()) {
        let mut shuffled = frames.clone();
        let n = shuffled.len();
        if n > 1 {
            shuffled.rotate_left((seed as usize) % n);
        }
        let mut buf = Vec::new();
        write_video_record(&mut buf, &meta, &shuffled).unwrap();
        let parsed = parse_video_bytes(&buf, ParseOptions { strict: false }).unwrap();
        prop_assert_eq!(&parsed.frames, &frames);
        let out_of_order = shuffled.windows(2).any(|w| w[0].frame_index > w[1].frame_index);
        prop_assert_eq!(!parsed.warnings.is_empty(), out_of_order);
    }

    #[test]
    fn validate_is_deterministic((meta, frames) in arb_video()) {
        let cfg = PipelineConfig::default();
        prop_assert_eq!(validate(&meta, &frames, &cfg), validate(&meta, &frames, &cfg));
    }
}
