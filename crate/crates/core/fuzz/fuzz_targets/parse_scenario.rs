#![no_main]

use libfuzzer_sys::fuzz_target;
use lwr_core::scenario::{parse_scenario, serialize_scenario};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(s) = parse_scenario(text) else {
        return;
    };
    // Validation must not panic, whatever it decides.
    let _ = s.validate();
    let canonical = serialize_scenario(&s);
    let again = parse_scenario(&canonical).expect("canonical text must parse");
    assert_eq!(serialize_scenario(&again), canonical);
});
