#![no_main]

use evfuse::frames::{decode_pnm, encode_pnm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_pnm(data) {
        let bytes = encode_pnm(&frame).expect("decoded frame encodes");
        let again = decode_pnm(&bytes).expect("encoded frame decodes");
        assert_eq!(again.data, frame.data);
    }
});
