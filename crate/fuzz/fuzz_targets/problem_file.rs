#![no_main]
use libfuzzer_sys::fuzz_target;

// Descriptor parsing and name resolution: algebras, actions, maps and elements.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = modcp::io::ProblemFile::parse(text) {
            let _ = file.resolve();
        }
    }
});
