#![no_main]

use libfuzzer_sys::fuzz_target;
use vwp_core::analytics::{analyze, parse_annotated, DEFAULT_ALPHA, DEFAULT_HISTORY};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(stories) = parse_annotated(text, "fuzz") {
            let _ = analyze(&stories, DEFAULT_HISTORY, DEFAULT_ALPHA);
        }
    }
});
