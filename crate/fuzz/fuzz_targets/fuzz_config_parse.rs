#![no_main]

use libfuzzer_sys::fuzz_target;

// The raw document parser must never panic, whatever the bytes decode to.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = uvoc_tsa::config::parse_document(&text);
});
