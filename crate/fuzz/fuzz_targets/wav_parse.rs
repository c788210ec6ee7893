#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = kws_core::harness::parse_wav(data) {
        assert!(!clip.samples().is_empty());
    }
});
