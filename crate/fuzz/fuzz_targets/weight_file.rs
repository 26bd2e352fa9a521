#![no_main]

use evfuse::nn::{parse_weight_file, serialize_weight_file};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = parse_weight_file(data) {
        let bytes = serialize_weight_file(&file);
        let again = parse_weight_file(&bytes).expect("serialised file parses");
        assert_eq!(serialize_weight_file(&again), bytes);
    }
});
