#![no_main]

use barnbench::envgen::CatalogManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = CatalogManifest::from_json_str(text) {
        let _ = m.validate();
        let again = CatalogManifest::from_json_str(&m.to_json_string()).expect("re-parse");
        assert_eq!(m, again);
    }
});
