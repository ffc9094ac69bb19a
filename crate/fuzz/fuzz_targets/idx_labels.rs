#![no_main]

use ecprune::data::parse_idx_labels;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(labels) = parse_idx_labels(data) {
        assert_eq!(labels.len() + 8, data.len());
    }
});
