#![no_main]

use libfuzzer_sys::fuzz_target;
use wallscan::dataset::{decode_record, encode_record};

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = decode_record(data) {
        // anything the decoder accepts must re-encode to the same bytes
        assert_eq!(encode_record(&record), data);
    }
});
