#![no_main]

use libfuzzer_sys::fuzz_target;
use vwp_core::corpus::GenderTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = GenderTable::parse(text, "fuzz");
    }
});
