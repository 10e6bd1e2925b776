#![no_main]

use libfuzzer_sys::fuzz_target;
use vwp_core::chargrid::{from_csv, to_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = from_csv(text) {
            let back = from_csv(&to_csv(&grid)).expect("written grid parses");
            assert_eq!(to_csv(&back), to_csv(&grid));
        }
    }
});
