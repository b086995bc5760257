#![no_main]

use libfuzzer_sys::fuzz_target;
use redist::fmm::read_raw;

// Input: u16 LE sidecar length, sidecar JSON, raw value block.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let len = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if rest.len() < len {
        return;
    }
    let Ok(sidecar) = std::str::from_utf8(&rest[..len]) else {
        return;
    };
    if let Ok(grid) = read_raw(&rest[len..], sidecar) {
        assert_eq!(grid.len() * 8, rest.len() - len);
    }
});
