#![no_main]

use evfuse::eval::parse_box_file;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(boxes) = parse_box_file(text) {
        assert!(boxes.iter().flatten().all(|b| b.is_valid()));
    }
});
