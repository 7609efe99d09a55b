#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_protocol::{replay_text, SessionLog};

fuzz_target!(|data: &str| {
    if let Ok(log) = SessionLog::parse(data) {
        assert_eq!(SessionLog::parse(&log.to_text()).as_ref(), Ok(&log));
        let _ = replay_text(data);
    }
});
