#![no_main]

use libfuzzer_sys::fuzz_target;
use musictraces_core::chord::format_corpus;
use musictraces_core::{parse_chord_corpus, train_markov};

fuzz_target!(|data: &str| {
    let Ok(corpus) = parse_chord_corpus(data) else {
        return;
    };
    let again = parse_chord_corpus(&format_corpus(&corpus.sequences)).expect("formatted corpus parses");
    assert_eq!(again.sequences, corpus.sequences);
    if let Ok(model) = train_markov(&corpus.sequences) {
        for row in model.transitions() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
});
