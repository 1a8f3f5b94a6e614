#![no_main]

use libfuzzer_sys::fuzz_target;
use wass_shrink::sqa::SparsityPattern;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = SparsityPattern::from_json_str(text) {
        assert!(p.pairs().all(|(i, j)| i < j && j < p.dim()));
        let again = SparsityPattern::from_json_str(&p.to_json_string()).expect("own output parses");
        assert_eq!(p, again);
    }
});
