#![no_main]

use libfuzzer_sys::fuzz_target;
use redist::field::catalog_get;

fuzz_target!(|data: &[u8]| {
    let Ok(id) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(field) = catalog_get(id) {
        let x = vec![0.25; field.dim()];
        let _ = field.eval(&x);
    }
});
