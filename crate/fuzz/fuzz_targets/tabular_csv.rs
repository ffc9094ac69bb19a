#![no_main]

use ecprune::data::{parse_tabular, write_tabular};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = parse_tabular(data, "fuzz") {
        // whatever parses must survive a write / re-read cycle
        let mut out = Vec::new();
        write_tabular(&d, &mut out).unwrap();
        let again = parse_tabular(out.as_slice(), "fuzz").unwrap();
        assert_eq!(again, d);
    }
});
