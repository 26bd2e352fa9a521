#![no_main]

use evfuse::frames::parse_timestamps;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(ts) = parse_timestamps(text) {
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }
});
