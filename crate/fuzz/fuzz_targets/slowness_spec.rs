#![no_main]

use libfuzzer_sys::fuzz_target;
use mtm_core::modular::{parse_slowness_table, SlownessSpec};

fuzz_target!(|data: &str| {
    // table:<file> reads the input itself instead of touching the disk.
    if let Ok(s) = SlownessSpec::parse_with(data, |_| Ok(data.to_string())) {
        for k in 1..=4 {
            let _ = s.at(k);
        }
    }
    let _ = parse_slowness_table(data);
});
