#![no_main]

use libfuzzer_sys::fuzz_target;
use wass_shrink::cv::TuningGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = TuningGrid::from_json_str(text) {
        let v = grid.values();
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| *x > 0.0 && x.is_finite()));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }
});
