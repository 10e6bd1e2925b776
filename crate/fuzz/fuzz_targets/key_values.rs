#![no_main]

use libfuzzer_sys::fuzz_target;
use vwp_core::model::{parse_key_values, ModelConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_key_values(text);
        if let Ok(cfg) = ModelConfig::from_canonical(text) {
            let again =
                ModelConfig::from_canonical(&cfg.to_canonical()).expect("canonical form parses");
            assert_eq!(again, cfg);
        }
    }
});
