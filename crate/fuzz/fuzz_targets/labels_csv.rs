#![no_main]

use libfuzzer_sys::fuzz_target;
use wass_shrink::io::read_labels;

fuzz_target!(|data: &[u8]| {
    let expected = data.first().map(|&b| usize::from(b % 8));
    if let Ok(labels) = read_labels(data, expected) {
        if let Some(n) = expected {
            assert_eq!(labels.len(), n);
        }
    }
});
