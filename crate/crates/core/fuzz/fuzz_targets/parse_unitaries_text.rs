#![no_main]

use libfuzzer_sys::fuzz_target;
use shadow_core::io::{parse_unitaries_text, unitaries_to_text};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(list) = parse_unitaries_text(text) {
        assert_eq!(
            parse_unitaries_text(&unitaries_to_text(&list)).expect("round trip"),
            list
        );
    }
});
