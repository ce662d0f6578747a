#![no_main]

use libfuzzer_sys::fuzz_target;
use shadow_core::io::{parse_unitaries_binary, unitaries_to_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok(list) = parse_unitaries_binary(data) {
        assert_eq!(unitaries_to_binary(&list), data);
    }
});
