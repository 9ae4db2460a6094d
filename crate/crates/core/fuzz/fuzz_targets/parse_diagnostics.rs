#![no_main]

use libfuzzer_sys::fuzz_target;
use lwr_core::archive::{parse_diagnostics, write_diagnostics};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(report) = parse_diagnostics(text) {
        let again =
            parse_diagnostics(&write_diagnostics(&report)).expect("written report must parse");
        assert_eq!(again.records.len(), report.records.len());
    }
});
