#![no_main]

use libfuzzer_sys::fuzz_target;
use triboson_cli::config::{parse_config, RunConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = parse_config(text) {
            if let Ok(config) = RunConfig::from_file(&file) {
                let _ = config.validate();
            }
        }
    }
});
