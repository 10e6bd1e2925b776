#![no_main]

use libfuzzer_sys::fuzz_target;
use vwp_core::metrics::{parse_eval_pairs, score_corpus, MetricConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pairs) = parse_eval_pairs(text, "fuzz") {
            // scoring must reject or score, never panic
            if pairs.len() <= 8 {
                let _ = score_corpus(&pairs, &MetricConfig::default());
            }
        }
    }
});
