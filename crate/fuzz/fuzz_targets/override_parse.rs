#![no_main]

use libfuzzer_sys::fuzz_target;
use mlgame::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let overrides: Vec<&str> = text.split('\n').collect();
    let mut cfg = ExperimentConfig::default();
    if cfg.apply_overrides(&overrides).is_ok() {
        let _ = cfg.validate();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
});
