//! Runs the checked-in fuzz corpus seeds through the same checks the fuzz
//! targets make, so the seeds stay meaningful on a stable toolchain.

use std::path::{Path, PathBuf};

use gest_core::config::PipelineConfig;
use gest_core::graph::{export_dot, GestGraph};
use gest_core::ingest::{parse_video_bytes, validate, write_video_record, ParseOptions};
use gest_core::llm::parse_jury_response;
use gest_core::metrics::{align, evaluate_corpus, parse_candidates, parse_references, CandidateLine};
use gest_core::pipeline::proto_for_graph;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed_"))
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn video_record_seeds() {
    let mut accepted = 0;
    for (path, data) in seeds("parse_video_record") {
        if let Ok(parsed) = parse_video_bytes(&data, ParseOptions { strict: false }) {
            assert!(parsed.frames.windows(2).all(|w| w[0].frame_index < w[1].frame_index), "{}", path.display());
            let _ = validate(&parsed.meta, &parsed.frames, &PipelineConfig::default());
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn strict_video_record_seeds() {
    let strict = ParseOptions { strict: true };
    let mut outcomes = (0, 0);
    for (_, data) in seeds("parse_video_record_strict") {
        match parse_video_bytes(&data, strict) {
            Ok(parsed) => {
                let mut out = Vec::new();
                write_video_record(&mut out, &parsed.meta, &parsed.frames).unwrap();
                let again = parse_video_bytes(&out, strict).unwrap();
                assert_eq!(again.frames, parsed.frames);
                outcomes.0 += 1;
            }
            Err(_) => outcomes.1 += 1,
        }
    }
    assert!(outcomes.0 > 0 && outcomes.1 > 0, "{outcomes:?}");
}

#[test]
fn graph_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("graph_from_json") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(g) = GestGraph::from_json(text) {
            let _ = export_dot(&g);
            let _ = proto_for_graph(&g);
            assert_eq!(GestGraph::from_json(&g.to_json()).unwrap().to_json(), g.to_json());
            accepted += 1;
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn config_seeds() {
    let results: Vec<bool> = seeds("config_from_toml")
        .into_iter()
        .map(|(_, data)| PipelineConfig::from_toml_str(std::str::from_utf8(&data).unwrap()).is_ok())
        .collect();
    // sorted: seed_invalid, seed_partial, seed_unknown
    assert_eq!(results, vec![false, true, false]);
}

#[test]
fn eval_input_seeds() {
    for (_, data) in seeds("parse_candidates") {
        let _ = parse_candidates(&data[..]);
    }
    let mut scored = 0;
    for (_, data) in seeds("parse_references") {
        let Ok(refs) = parse_references(&data[..]) else { continue };
        let candidates = refs
            .iter()
            .map(|r| CandidateLine {
                video_id: r.video_id.clone(),
                text: "a person walks to the door".to_string(),
            })
            .collect();
        if let Ok(pairs) = align(candidates, refs) {
            assert!(evaluate_corpus(&pairs).overall.bleu4.is_finite());
            scored += 1;
        }
    }
    assert!(scored >= 1);
}

#[test]
fn jury_response_seeds() {
    let mut accepted = 0;
    for (_, data) in seeds("parse_jury_response") {
        let (&n, rest) = data.split_first().unwrap();
        let n = usize::from(n % 27);
        if let Ok(verdicts) = parse_jury_response(std::str::from_utf8(rest).unwrap(), n) {
            assert_eq!(verdicts.len(), n);
            accepted += 1;
        }
    }
    assert_eq!(accepted, 1);
}
