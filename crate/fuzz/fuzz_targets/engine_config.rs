#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_core::EngineConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = EngineConfig::parse(data) {
        let again = EngineConfig::parse(&cfg.to_text()).expect("formatted config parses");
        assert_eq!(again.digest(), cfg.digest());
        let _ = cfg.validate();
    }
});
