#![no_main]

use libfuzzer_sys::fuzz_target;
use lwr_core::archive::{parse_overlay, write_overlay};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(records) = parse_overlay(text) {
        let again = parse_overlay(&write_overlay(&records)).expect("written overlay must parse");
        assert_eq!(again.len(), records.len());
    }
});
