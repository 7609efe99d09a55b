#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_protocol::{decode, encode_line};

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = decode(data) {
        assert_eq!(decode(encode_line(&msg).as_bytes()), Ok(msg));
    }
});
