#![no_main]

use gest_core::config::PipelineConfig;
use gest_core::ingest::{parse_video_bytes, validate, ParseOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Lenient parsing must never panic; whatever it keeps comes back sorted and unique
    if let Ok(parsed) = parse_video_bytes(data, ParseOptions { strict: false }) {
        assert!(parsed.frames.windows(2).all(|w| w[0].frame_index < w[1].frame_index));
        let _ = validate(&parsed.meta, &parsed.frames, &PipelineConfig::default());
    }
});
