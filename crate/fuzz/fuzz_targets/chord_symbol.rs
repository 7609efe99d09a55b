#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_core::ChordSymbol;

fuzz_target!(|data: &str| {
    if let Ok(c) = data.parse::<ChordSymbol>() {
        assert_eq!(c.to_string().parse::<ChordSymbol>(), Ok(c));
    }
});
