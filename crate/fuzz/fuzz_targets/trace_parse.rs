#![no_main]

use dirgrad_core::trace::{parse_trace, trace_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_trace(text) {
        assert_eq!(parse_trace(&trace_to_string(&rows)).unwrap(), rows);
    }
});
