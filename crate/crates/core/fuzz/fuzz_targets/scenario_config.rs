#![no_main]

use libfuzzer_sys::fuzz_target;
use shadow_core::experiments::{Scenario, ScenarioConfig, ScenarioKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ScenarioConfig::from_json(text) else {
        return;
    };
    for kind in ScenarioKind::ALL {
        if let Ok(s) = Scenario::from_config(kind, cfg.clone()) {
            assert!(s.validate().is_ok());
        }
    }
});
