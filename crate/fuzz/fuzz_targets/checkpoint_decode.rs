#![no_main]

use libfuzzer_sys::fuzz_target;
use redist::net::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = decode_checkpoint(data) {
        // anything accepted must re-encode to the same bytes
        assert_eq!(encode_checkpoint(&ck.params, ck.phi_scale), data);
    }
});
