#![no_main]

use libfuzzer_sys::fuzz_target;
use shadow_core::experiments::{parse_grid, parse_int_grid};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(values) = parse_grid(text) {
        assert!(values.iter().all(|v| v.is_finite()));
    }
    if let Ok(values) = parse_int_grid(text) {
        assert!(values.iter().all(|&v| v >= 1));
    }
});
