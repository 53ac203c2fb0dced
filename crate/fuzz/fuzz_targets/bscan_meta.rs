#![no_main]

use libfuzzer_sys::fuzz_target;
use wallscan::dataset::parse_bscan_meta;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_bscan_meta(text);
    }
});
