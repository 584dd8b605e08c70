#![no_main]
use libfuzzer_sys::fuzz_target;
use modcp::io::{matrix_from_json, matrix_to_json, JsonMatrix};

fuzz_target!(|data: &[u8]| {
    let Ok(json) = serde_json::from_slice::<JsonMatrix>(data) else {
        return;
    };
    if let Ok(m) = matrix_from_json(&json) {
        let back = matrix_from_json(&matrix_to_json(&m)).expect("re-encoded matrix parses");
        assert_eq!(back.shape(), m.shape());
    }
});
