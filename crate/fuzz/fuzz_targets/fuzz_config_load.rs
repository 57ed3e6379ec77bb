#![no_main]

use libfuzzer_sys::fuzz_target;

// The full load path (parse + typed extraction + validation) must return an
// error for bad documents, never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = uvoc_tsa::config::load_params(text);
    }
});
