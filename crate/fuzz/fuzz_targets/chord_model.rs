#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_core::ChordModel;

fuzz_target!(|data: &str| {
    if let Ok(model) = ChordModel::from_text(data) {
        assert_eq!(ChordModel::from_text(&model.to_text()).as_ref(), Ok(&model));
    }
});
