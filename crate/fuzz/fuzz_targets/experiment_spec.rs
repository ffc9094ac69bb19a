#![no_main]

use ecprune::harness::ExperimentSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = ExperimentSpec::from_toml_str(text) {
        let again = ExperimentSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, spec);
    }
});
