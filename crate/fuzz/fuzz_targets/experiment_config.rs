#![no_main]

use barnbench::bench::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ExperimentConfig::from_toml_str(text) {
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string()).expect("re-parse");
        assert_eq!(c, again);
    }
});
