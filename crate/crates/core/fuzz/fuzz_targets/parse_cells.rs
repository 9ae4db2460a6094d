#![no_main]

use libfuzzer_sys::fuzz_target;
use lwr_core::archive::{parse_cells, write_cells};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((edges, values)) = parse_cells(text) {
        let again = parse_cells(&write_cells(&edges, &values)).expect("written cells must parse");
        assert_eq!(again.0.len(), edges.len());
        assert_eq!(again.1.len(), values.len());
    }
});
