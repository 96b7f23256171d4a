#![no_main]

use gest_core::llm::parse_jury_response;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // First byte picks the candidate count, the rest is the judge's reply
    let Some((&n, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let n = usize::from(n % 27);
    if let Ok(verdicts) = parse_jury_response(text, n) {
        assert_eq!(verdicts.len(), n);
        assert!(verdicts.windows(2).all(|w| w[0].rank < w[1].rank));
    }
});
