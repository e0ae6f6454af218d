#![no_main]

use ccopt_core::experiments::RunManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RunManifest::from_json_str(text) {
        assert_eq!(RunManifest::from_json_str(&m.to_json()).unwrap(), m);
    }
});
