#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_cli::scenario::Scenario;

fuzz_target!(|data: &str| {
    if let Ok(scn) = Scenario::parse(data) {
        let again = Scenario::parse(&scn.to_text()).expect("formatted scenario parses");
        let actions = |s: &Scenario| {
            s.steps
                .iter()
                .map(|st| (st.tick, st.action.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(actions(&again), actions(&scn));
        assert_eq!(again.end_tick(), scn.end_tick());
    }
});
