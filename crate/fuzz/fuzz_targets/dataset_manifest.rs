#![no_main]

use libfuzzer_sys::fuzz_target;
use wallscan::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = DatasetManifest::parse(text) {
        let again = serde_json::to_string(&m).unwrap();
        assert_eq!(DatasetManifest::parse(&again).unwrap(), m);
    }
});
