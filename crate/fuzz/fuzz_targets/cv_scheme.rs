#![no_main]

use libfuzzer_sys::fuzz_target;
use wass_shrink::cv::CvScheme;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(scheme) = CvScheme::parse(text) {
        let n = usize::from(n);
        if let Ok(folds) = scheme.folds(n, 0) {
            let mut all: Vec<usize> = folds.concat();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }
});
