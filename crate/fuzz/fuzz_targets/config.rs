#![no_main]

use libfuzzer_sys::fuzz_target;
use ptscrc_cli::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for parsed in [ExperimentConfig::from_toml(text), ExperimentConfig::from_json(text)] {
        if let Ok(cfg) = parsed {
            let back = ExperimentConfig::from_json(&cfg.canonical_json()).unwrap();
            assert_eq!(cfg.hash(), back.hash());
        }
    }
});
