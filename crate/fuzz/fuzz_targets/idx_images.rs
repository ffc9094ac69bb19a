#![no_main]

use ecprune::data::parse_idx_images;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = parse_idx_images(data) {
        assert_eq!(img.pixels.len(), img.count * img.rows * img.cols);
    }
});
