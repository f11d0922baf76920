#![no_main]

use libfuzzer_sys::fuzz_target;
use rssl::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        assert_eq!(parse_config(&config.to_text()).unwrap(), config);
    }
});
