#![no_main]

use libfuzzer_sys::fuzz_target;
use redist_cli::{parse_sweep, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        let _ = cfg.validate();
        let _ = cfg.run_id();
    }
    if let Ok(runs) = parse_sweep(text) {
        assert!(!runs.is_empty());
    }
});
