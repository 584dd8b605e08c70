#![no_main]
use libfuzzer_sys::fuzz_target;
use modcp::io::MapWitness;

fuzz_target!(|data: &[u8]| {
    let Ok(w) = serde_json::from_slice::<MapWitness>(data) else {
        return;
    };
    if let Ok(map) = w.to_map() {
        assert_eq!(MapWitness::of(&map).to_map().ok(), Some(map));
    }
});
