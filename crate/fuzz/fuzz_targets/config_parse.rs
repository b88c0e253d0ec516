#![no_main]

use dirgrad_cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // Whatever parses must survive a round trip.
        let again = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&again).unwrap(), cfg);
    }
});
