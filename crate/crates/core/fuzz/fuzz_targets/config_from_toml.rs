#![no_main]

use gest_core::config::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // A config that parses has already passed validation, so validating again must agree
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_toml_str(text) {
        assert!(cfg.validate().is_ok());
    }
});
