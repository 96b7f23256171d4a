#![no_main]

use gest_core::metrics::{align, evaluate_corpus, parse_references, CandidateLine};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Pair every parsed reference with a fixed candidate and score the corpus
    let Ok(refs) = parse_references(data) else { return };
    let candidates = refs
        .iter()
        .map(|r| CandidateLine {
            video_id: r.video_id.clone(),
            text: "a person walks to the door".to_string(),
        })
        .collect();
    if let Ok(pairs) = align(candidates, refs) {
        let report = evaluate_corpus(&pairs);
        assert!(report.overall.bleu4.is_finite());
    }
});
