#![no_main]

use libfuzzer_sys::fuzz_target;
use wass_shrink::io::{matrix_to_string, read_matrix};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = read_matrix(data) {
        assert!(m.nrows() > 0 && m.ncols() > 0);
        let back = read_matrix(matrix_to_string(&m).as_bytes()).expect("own output parses");
        assert!(m
            .iter()
            .zip(back.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
