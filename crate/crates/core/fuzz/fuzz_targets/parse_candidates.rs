#![no_main]

use gest_core::metrics::parse_candidates;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Arbitrary JSONL: Err is fine, a panic is not
    let _ = parse_candidates(data);
});
