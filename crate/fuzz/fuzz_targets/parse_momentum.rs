#![no_main]

use libfuzzer_sys::fuzz_target;
use triboson_cli::config::parse_momentum;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(k) = parse_momentum(text) {
            assert!(!k.is_empty() && k.len() <= 2);
            assert!(k.iter().all(|v| v.is_finite()));
        }
    }
});
