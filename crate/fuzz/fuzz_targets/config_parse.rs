#![no_main]

use libfuzzer_sys::fuzz_target;
use kws_core::harness::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_toml(text) {
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
});
