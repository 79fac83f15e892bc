#![no_main]

use libfuzzer_sys::fuzz_target;
use pxlap::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Err(errors) = parse_config_str(text, "fuzz") {
            let _ = errors.to_string();
        }
    }
});
