#![no_main]

use libfuzzer_sys::fuzz_target;
use wallscan::{ScanConfig, Scene, WaveformConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(scene) = serde_json::from_slice::<Scene>(data) {
        let _ = scene.validate();
    }
    if let Ok(scan) = serde_json::from_slice::<ScanConfig>(data) {
        if scan.validate().is_ok() {
            let _ = scan.columns();
        }
    }
    let _ = serde_json::from_slice::<WaveformConfig>(data);
});
