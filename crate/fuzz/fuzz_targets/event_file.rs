#![no_main]

use evfuse::event::{parse_event_file, serialize_event_stream};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(stream) = parse_event_file(data) {
        let bytes = serialize_event_stream(&stream);
        let again = parse_event_file(&bytes).expect("canonical output parses");
        assert_eq!(again, stream);
        assert_eq!(serialize_event_stream(&again), bytes);
    }
});
