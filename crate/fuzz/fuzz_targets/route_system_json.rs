#![no_main]

use libfuzzer_sys::fuzz_target;
use mtm_core::io::parse_route_system_json;

fuzz_target!(|data: &str| {
    let _ = parse_route_system_json(data);
});
