#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use kws_core::harness::Manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = Manifest::parse(text, Path::new("/corpus")) {
        let again = Manifest::parse(&m.to_text(Path::new("/corpus")), Path::new("/corpus")).unwrap();
        assert_eq!(again, m);
    }
});
