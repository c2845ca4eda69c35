#![no_main]

use libfuzzer_sys::fuzz_target;
use mtm_core::scalar::{parse_rational, Scalar};

fuzz_target!(|data: &str| {
    if let Some(r) = parse_rational(data) {
        assert_eq!(parse_rational(&r.render()), Some(r));
    }
});
