#![no_main]

use gest_core::ingest::{parse_video_bytes, write_video_record, ParseOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything strict mode accepts must survive a write and a second strict parse
    let strict = ParseOptions { strict: true };
    if let Ok(parsed) = parse_video_bytes(data, strict) {
        let mut out = Vec::new();
        write_video_record(&mut out, &parsed.meta, &parsed.frames).unwrap();
        let again = parse_video_bytes(&out, strict).expect("written record parses");
        assert_eq!(again.frames.len(), parsed.frames.len());
    }
});
