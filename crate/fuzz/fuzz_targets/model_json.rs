#![no_main]

use libfuzzer_sys::fuzz_target;
use mtm_core::io::{model_to_json, parse_model_json};
use mtm_core::scalar::Exact;

fuzz_target!(|data: &str| {
    // Anything that parses must survive a round trip.
    if let Ok(m) = parse_model_json::<Exact>(data) {
        let again = parse_model_json::<Exact>(&model_to_json(&m)).expect("re-parse");
        assert_eq!(again.trace_set().traces(), m.trace_set().traces());
    }
    let _ = parse_model_json::<f64>(data);
});
