#![no_main]

use ecprune::harness::ExperimentReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = ExperimentReport::from_csv(data) {
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        let again = ExperimentReport::from_csv(out.as_slice()).unwrap();
        assert_eq!(again.rows.len(), report.rows.len());
    }
});
