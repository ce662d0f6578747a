#![no_main]

use libfuzzer_sys::fuzz_target;
use shadow_core::io::{parse_records, records_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = parse_records(text) {
        let again = parse_records(&records_to_string(&file)).expect("written records parse");
        assert_eq!(again, file);
    }
});
