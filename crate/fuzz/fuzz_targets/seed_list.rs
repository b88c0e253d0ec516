#![no_main]

use dirgrad_cli::seeds::parse_seed_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_seed_list(text);
    }
});
