#![no_main]

use evfuse::eval::parse_attributes;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_attributes(text);
});
